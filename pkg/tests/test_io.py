import numpy as np
import pytest

from optds.errors import DuplicateLabelError, EmptyDatasetError, LabelOutOfRangeError, ParseError
from optds.io import (
    read_confusions,
    read_labels,
    read_truth,
    write_confusions,
    write_labels,
    write_truth,
)
from optds.synth import SynthConfig, generate
from optds.pipeline import wrap_synthetic


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_two_lines(tmp_path):
    data = read_labels(_write(tmp_path, "l.csv", "1,1,2\n2,1,1\n"), k=2)
    assert (data.labels.num_workers, data.labels.num_items) == (2, 1)
    assert data.labels.to_entries() == {(1, 1): 2, (2, 1): 1}


def test_zero_label(tmp_path):
    with pytest.raises(LabelOutOfRangeError):
        read_labels(_write(tmp_path, "l.csv", "1,1,0\n"))


def test_label_above_k(tmp_path):
    with pytest.raises(LabelOutOfRangeError):
        read_labels(_write(tmp_path, "l.csv", "1,1,3\n"), k=2)


def test_duplicate_pair(tmp_path):
    with pytest.raises(DuplicateLabelError):
        read_labels(_write(tmp_path, "l.csv", "1,1,1\n1,1,2\n"))


def test_comments_only(tmp_path):
    with pytest.raises(EmptyDatasetError):
        read_labels(_write(tmp_path, "l.csv", "# nothing\n\n"))


@pytest.mark.parametrize("line", ["1,2\n", "1,a,2\n", "1,2,3,4\n", "-1,2,1\n"])
def test_malformed(tmp_path, line):
    with pytest.raises(ParseError) as info:
        read_labels(_write(tmp_path, "l.csv", "# header\n" + line))
    assert info.value.line == 2


def test_sparse_ids_densified(tmp_path):
    data = read_labels(_write(tmp_path, "l.csv", "17,100,1\n5,100,3\n17,7,2\n"))
    assert data.worker_ids.tolist() == [5, 17]
    assert data.item_ids.tolist() == [7, 100]
    assert data.labels.num_classes == 3
    assert data.labels.to_entries() == {(2, 2): 1, (1, 2): 3, (2, 1): 2}


def test_rte_shaped_file(tmp_path):
    # 164 workers, 800 items, 8000 labels, 10 per item
    rng = np.random.default_rng(0)
    lines = []
    for j in range(1, 801):
        for w in rng.choice(164, size=10, replace=False):
            lines.append(f"{w + 1},{j},{rng.integers(1, 3)}")
    covered = {int(l.split(",")[0]) for l in lines}
    data = read_labels(_write(tmp_path, "rte.csv", "\n".join(lines) + "\n"), k=2)
    assert data.labels.num_workers == len(covered) == 164
    assert data.labels.num_items == 800
    assert data.labels.num_labels == 8000


def test_truth_reading(tmp_path):
    assert read_truth(_write(tmp_path, "t.csv", "1,2\n")) == {1: 2}
    assert read_truth(_write(tmp_path, "t.csv", "4,1\n9,2\n")) == {4: 1, 9: 2}
    with pytest.raises(ParseError):
        read_truth(_write(tmp_path, "t.csv", "1,2\n1,1\n"))


def test_round_trip(tmp_path):
    lab, model = generate(SynthConfig(m=8, n=40, k=3, regime="one_coin", sparsity=0.5, seed=2))
    data = wrap_synthetic(lab)
    write_labels(tmp_path / "l.csv", data)
    write_truth(tmp_path / "t.csv", data.item_ids, model.truth)
    write_confusions(tmp_path / "c.csv", data.worker_ids, model.confusions)
    back = read_labels(tmp_path / "l.csv", k=3)
    present = np.unique(lab.item) + 1
    assert back.item_ids.tolist() == present.tolist()
    assert back.labels.num_labels == lab.num_labels
    old = {(int(data.worker_ids[i]), int(data.item_ids[j])): int(c) + 1 for i, j, c in zip(lab.worker, lab.item, lab.label)}
    new = {
        (int(back.worker_ids[i]), int(back.item_ids[j])): int(c) + 1
        for i, j, c in zip(back.labels.worker, back.labels.item, back.labels.label)
    }
    assert old == new
    truth = read_truth(tmp_path / "t.csv")
    assert truth == {j + 1: int(c) + 1 for j, c in enumerate(model.truth)}
    conf = read_confusions(tmp_path / "c.csv", data.worker_index(), 3)
    assert np.array_equal(conf, model.confusions)


def test_confusions_missing_worker(tmp_path):
    write_confusions(tmp_path / "c.csv", [1], np.eye(2)[None])
    with pytest.raises(ParseError):
        read_confusions(tmp_path / "c.csv", {1: 0, 2: 1}, 2)
