import numpy as np
import pytest

from helpers import git, make_repo


@pytest.fixture
def git_repo(tmp_path):
    """Repo with two Java commits and a merge that changes nothing."""
    repo = tmp_path / "repo"
    ids = make_repo(repo, [
        {"src/Foo.java": "class Foo {\n}\n"},
        {"src/Foo.java": "class Foo {\n  int x = 0;\n  void f() { if (x <= 1) { x = 2; } }\n}\n"},
    ])
    git(repo, "checkout", "-q", "-b", "side")
    (repo / "README.md").write_text("side\n")
    git(repo, "add", "README.md")
    git(repo, "commit", "-q", "-m", "side", date=1_600_000_500)
    git(repo, "checkout", "-q", "main")
    git(repo, "merge", "-q", "--no-ff", "-s", "ours", "side", "-m", "merge", date=1_600_000_600)
    merge = git(repo, "rev-parse", "HEAD")
    return repo, ids, merge


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory):
    from bicdetect.synth import generate_corpus
    d = tmp_path_factory.mktemp("synth")
    generate_corpus(d, n_commits=120, seed=3)
    return d


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
