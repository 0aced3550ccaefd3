import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from triarch.graph import FollowEdge, PageNode, Stance, build_snapshot  # noqa: E402


def page(node_id, stance=Stance.ANTI, **kw):
    if stance is Stance.NEUTRAL and "subcategory" not in kw:
        kw["subcategory"] = "parenting"
    return PageNode(node_id, stance, **kw)


@pytest.fixture
def make_page():
    return page


@pytest.fixture
def triangle():
    nodes = [page("a"), page("b", Stance.PRO), page("c", Stance.NEUTRAL)]
    return build_snapshot("tri", nodes, [("a", "b"), ("b", "c"), ("c", "a")])


@pytest.fixture
def reference_pair():
    from triarch.synth import reference_pair

    return reference_pair()
