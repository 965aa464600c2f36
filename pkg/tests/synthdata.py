import numpy as np

from deepfa.data import Dataset


def make_dataset(n, n_classes, d=3, seed=0, class_sizes=None, name="synthetic"):
    """Synthetic dataset with the requested class sizes (uniform by default)."""
    rng = np.random.default_rng(seed)
    if class_sizes is None:
        base = n // n_classes
        class_sizes = [base] * n_classes
        for i in range(n - base * n_classes):
            class_sizes[i] += 1
    assert sum(class_sizes) == n
    labels = np.concatenate([np.full(s, c) for c, s in enumerate(class_sizes)])
    features = rng.normal(size=(n, d)) + 5.0 * labels[:, None]
    ids = tuple(f"s{i:05d}" for i in range(n))
    return Dataset(ids, features, labels,
                   tuple(f"class{c}" for c in range(n_classes)), name=name)


def make_blobs(n_per_class, centers, sigma=1.0, seed=0):
    """Gaussian blobs around the given center vectors; returns (X, labels)."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for c, center in enumerate(centers):
        xs.append(rng.normal(0.0, sigma, size=(n_per_class, len(center))) + center)
        ys.append(np.full(n_per_class, c))
    return np.vstack(xs), np.concatenate(ys)


def blob_dataset(n_per_class, centers, sigma=1.0, seed=0, name="blobs"):
    features, labels = make_blobs(n_per_class, centers, sigma=sigma, seed=seed)
    n = features.shape[0]
    ids = tuple(f"b{i:05d}" for i in range(n))
    return Dataset(ids, features, labels,
                   tuple(f"class{c}" for c in range(len(centers))), name=name)
