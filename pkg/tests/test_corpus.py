import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicdetect.corpus import (
    CommitRecord,
    Dataset,
    LabelSchema,
    attach_patches_from_files,
    fetch_patch,
    load_labels,
    locate_commit,
    read_dataset,
    split_time_ordered,
    write_dataset,
)
from bicdetect.errors import (
    CommitNotFound,
    DuplicateCommit,
    EmptySplit,
    MissingColumn,
    MissingTimestamp,
    RepoUnavailable,
    UnparsableLabel,
)

from helpers import make_repo


def _csv(tmp_path, text, name="labels.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_two_records(tmp_path):
    ds = load_labels(_csv(tmp_path, "commit_id,label\nabc1,1\ndef2,0\n"))
    assert [r.commit_id for r in ds] == ["abc1", "def2"]
    assert ds.labels == [1, 0]
    assert ds.project == "labels"


def test_duplicate_commit(tmp_path):
    with pytest.raises(DuplicateCommit):
        load_labels(_csv(tmp_path, "commit_id,label\nabc1,1\nabc1,0\n"))


def test_same_id_in_two_projects_is_fine(tmp_path):
    p = _csv(tmp_path, "project,commit_id,label\nA,abc1,1\nB,abc1,0\n")
    ds = load_labels(p, LabelSchema(project="project"))
    assert len(ds) == 2


def test_missing_column(tmp_path):
    with pytest.raises(MissingColumn):
        load_labels(_csv(tmp_path, "sha,label\nabc1,1\n"))


def test_unparsable_label(tmp_path):
    with pytest.raises(UnparsableLabel):
        load_labels(_csv(tmp_path, "commit_id,label\nabc1,maybe\n"))


def test_schema_rejects_unknown_keys():
    with pytest.raises(Exception):
        LabelSchema.from_dict({"commit": "x"})


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=30))
def test_automatic_label_mapping(tmp_path_factory, counts):
    d = tmp_path_factory.mktemp("auto")
    body = "".join(f"c{i},{c}\n" for i, c in enumerate(counts))
    ds = load_labels(_csv(d, "commit_id,bugs\n" + body), LabelSchema(label="bugs"), source_kind="automatic")
    assert ds.labels == [1 if c >= 1 else 0 for c in counts]


def test_automatic_rejects_negative_counts(tmp_path):
    with pytest.raises(UnparsableLabel):
        load_labels(_csv(tmp_path, "commit_id,label\na,-1\n"), source_kind="automatic")


def test_iso_timestamps(tmp_path):
    ds = load_labels(_csv(tmp_path, "commit_id,label,date\na,1,2020-01-01T00:00:00Z\nb,0,1577836801\n"),
                     LabelSchema(timestamp="date"))
    assert [r.timestamp for r in ds] == [1577836800, 1577836801]


def test_reload_is_identical(tmp_path):
    p = _csv(tmp_path, "commit_id,label,ts\nb,1,5\na,0,3\n")
    assert load_labels(p, LabelSchema(timestamp="ts")) == load_labels(p, LabelSchema(timestamp="ts"))


def _ds(stamps):
    return Dataset([CommitRecord(f"c{i:02d}", "p", t, i % 2) for i, t in enumerate(stamps)], "p")


def test_split_ten():
    train, test = split_time_ordered(_ds(range(1, 11)), 0.7)
    assert [r.timestamp for r in train] == list(range(1, 8))
    assert [r.timestamp for r in test] == [8, 9, 10]


def test_split_ties_break_by_commit_id():
    recs = [CommitRecord(cid, "p", 5, 0) for cid in ("d", "b", "a", "c")]
    train, test = split_time_ordered(Dataset(recs, "p"), 0.5)
    assert train.commit_ids == ["a", "b"]
    assert test.commit_ids == ["c", "d"]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 20), min_size=2, max_size=40),
       st.floats(0.05, 0.95), st.randoms(use_true_random=False))
def test_split_properties(stamps, frac, rnd):
    ds = _ds(stamps)
    try:
        train, test = split_time_ordered(ds, frac)
    except EmptySplit:
        return
    shuffled = list(ds.records)
    rnd.shuffle(shuffled)
    train2, test2 = split_time_ordered(ds.replace_records(shuffled), frac)
    assert train2.commit_ids == train.commit_ids and test2.commit_ids == test.commit_ids
    ids = set(train.commit_ids) | set(test.commit_ids)
    assert ids == set(ds.commit_ids) and not set(train.commit_ids) & set(test.commit_ids)
    assert max(r.timestamp for r in train) <= min(r.timestamp for r in test)
    import math
    assert len(train) == math.ceil(round(frac * len(ds), 9))


def test_split_needs_timestamps():
    with pytest.raises(MissingTimestamp):
        split_time_ordered(Dataset([CommitRecord("a", "p", None, 1), CommitRecord("b", "p", 1, 0)], "p"))


def test_split_empty_side():
    with pytest.raises(EmptySplit):
        split_time_ordered(_ds([1, 2]), 0.9)


def test_fetch_patch(git_repo):
    repo, ids, merge = git_repo
    patch = fetch_patch(repo, ids[1])
    assert "+  int x = 0;" in patch.splitlines()
    assert fetch_patch(repo, merge) == ""
    with pytest.raises(CommitNotFound):
        fetch_patch(repo, "0" * 40)


def test_fetch_patch_not_a_repo(tmp_path):
    with pytest.raises(RepoUnavailable):
        fetch_patch(tmp_path, "abc")


def test_locate_commit(tmp_path):
    a = make_repo(tmp_path / "A", [{"a.txt": "a"}])
    b_ids = make_repo(tmp_path / "B", [{"b.txt": "b"}])
    make_repo(tmp_path / "C", [{"c.txt": "c"}])
    roots = [tmp_path / "C", tmp_path / "B", tmp_path / "A"]
    assert locate_commit(b_ids[0], roots) == str(tmp_path / "B")
    assert locate_commit(a[0], roots) == str(tmp_path / "A")
    # same history cloned into B2: lexicographic first wins
    import shutil
    shutil.copytree(tmp_path / "B", tmp_path / "AB")
    assert locate_commit(b_ids[0], roots + [tmp_path / "AB"]) == str(tmp_path / "AB")
    with pytest.raises(CommitNotFound):
        locate_commit("f" * 40, roots)


def test_dataset_round_trip(tmp_path):
    recs = [CommitRecord("a", "p", 3, 1, "diff a\n", {"la": 1.5}), CommitRecord("b", "p", 4, 0, "diff b\n")]
    ds = Dataset(recs, "p")
    path = write_dataset(ds, tmp_path / "d.jsonl", tmp_path / "patches")
    back = read_dataset(path)
    assert [(r.commit_id, r.timestamp, r.label, r.patch_text, r.gs_row) for r in back] == \
        [(r.commit_id, r.timestamp, r.label, r.patch_text, r.gs_row) for r in recs]
    assert all(json.loads(line)["project"] == "p" for line in path.read_text().splitlines())


def test_attach_patches(tmp_path):
    (tmp_path / "patches").mkdir()
    (tmp_path / "patches" / "a.diff").write_text("x")
    ds = Dataset([CommitRecord("a", "p", 1, 1)], "p")
    assert attach_patches_from_files(ds, tmp_path / "patches").records[0].patch_text == "x"
