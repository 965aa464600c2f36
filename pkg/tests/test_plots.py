import numpy as np
import pytest

from deepfa.errors import DimensionError, ParseError, SpecError
from deepfa.opf import write_propagation_csv
from deepfa.plots import (
    BY_CONFIDENCE,
    BY_LABEL,
    PALETTE,
    PlotSpec,
    confidence_color,
    render_scatter,
)
from deepfa.tsne import write_embedding_csv


@pytest.fixture
def artifact_files(tmp_path):
    ids = ["a", "b", "c"]
    emb = np.array([[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]])
    write_embedding_csv(tmp_path / "emb.csv", ids, emb)
    write_propagation_csv(
        tmp_path / "labels.csv", ids,
        ["cat", "dog", "cat"],
        np.array([0.0, 0.3, 0.6]),
        np.array([1.0, 0.5, 0.0]),
        np.array([True, False, False]),
    )
    with open(tmp_path / "conf.csv", "w", encoding="utf-8") as fh:
        fh.write("id,confidence\na,1.0\nb,0.5\nc,0.0\n")
    return tmp_path


def test_confidence_color_endpoints_and_midpoint():
    assert confidence_color(0.0) == "#FF0000"
    assert confidence_color(1.0) == "#00FF00"
    assert confidence_color(0.5) == "#808000"


def test_scatter_structure(artifact_files):
    spec = PlotSpec(embedding=artifact_files / "emb.csv",
                    labels=artifact_files / "labels.csv")
    svg = render_scatter(spec)
    assert svg.count("<circle") == 3
    assert svg.startswith("<svg xmlns=")
    assert svg.rstrip().endswith("</svg>")


def test_by_label_colors_supervised_palette_unsupervised_black(artifact_files):
    spec = PlotSpec(embedding=artifact_files / "emb.csv",
                    labels=artifact_files / "labels.csv", color_mode=BY_LABEL)
    svg = render_scatter(spec)
    # 'a' is supervised class "cat" (first sorted name -> palette slot 0);
    # 'b' and 'c' are unsupervised -> black
    assert svg.count(f'fill="{PALETTE[0]}"') == 1
    assert svg.count('fill="#000000"') == 2


def test_by_confidence_uses_confidence_file(artifact_files):
    spec = PlotSpec(embedding=artifact_files / "emb.csv",
                    confidence=artifact_files / "conf.csv",
                    color_mode=BY_CONFIDENCE)
    svg = render_scatter(spec)
    for color in ("#00FF00", "#808000", "#FF0000"):
        assert f'fill="{color}"' in svg


def test_by_confidence_falls_back_to_labels_column(artifact_files):
    spec = PlotSpec(embedding=artifact_files / "emb.csv",
                    labels=artifact_files / "labels.csv",
                    color_mode=BY_CONFIDENCE)
    svg = render_scatter(spec)
    assert 'fill="#808000"' in svg


def test_svg_bytes_deterministic(artifact_files):
    spec = PlotSpec(embedding=artifact_files / "emb.csv",
                    labels=artifact_files / "labels.csv")
    assert render_scatter(spec) == render_scatter(spec)


def test_row_count_mismatch_rejected(artifact_files, tmp_path):
    write_embedding_csv(tmp_path / "short.csv", ["a", "b"], np.zeros((2, 2)))
    spec = PlotSpec(embedding=tmp_path / "short.csv",
                    labels=artifact_files / "labels.csv")
    with pytest.raises(DimensionError):
        render_scatter(spec)


def test_missing_file_and_bad_mode(artifact_files):
    with pytest.raises(ParseError):
        render_scatter(PlotSpec(embedding=artifact_files / "nope.csv",
                                labels=artifact_files / "labels.csv"))
    with pytest.raises(SpecError):
        PlotSpec(embedding=artifact_files / "emb.csv", color_mode="rainbow")
    with pytest.raises(SpecError):
        render_scatter(PlotSpec(embedding=artifact_files / "emb.csv",
                                color_mode=BY_LABEL))


def test_palette_cycles_past_twelve(artifact_files, tmp_path):
    n = 15
    ids = [f"s{i}" for i in range(n)]
    write_embedding_csv(tmp_path / "e.csv", ids,
                        np.random.default_rng(0).normal(size=(n, 2)))
    write_propagation_csv(
        tmp_path / "l.csv", ids,
        [f"class{i:02d}" for i in range(n)],
        np.zeros(n), np.ones(n), np.ones(n, dtype=bool),
    )
    svg = render_scatter(PlotSpec(embedding=tmp_path / "e.csv",
                                  labels=tmp_path / "l.csv"))
    # the 13th class reuses palette slot 0
    assert svg.count(f'fill="{PALETTE[0]}"') == 2
