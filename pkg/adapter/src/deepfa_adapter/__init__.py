"""Convolutional extractor plugin for the annotation engine.

Implements the engine's external extractor protocol (train / extract /
predict over DFA1 feature files) with a torch CNN, exposing the flattened
activations of the last max-pooling layer as features.
"""

__version__ = "0.1.0"

PROTOCOL_VERSION = 1
