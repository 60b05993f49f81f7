import math

import pytest

from storagebench.features import (
    anchor_relations,
    compute_aspect,
    countertop_relation,
    featurize,
    find_neighbors,
)
from storagebench.geometry import Direction, Polygon
from storagebench.scene import (
    AspectClass,
    CountertopRelation,
    Detection,
    assemble_table,
    detections_from_dict,
)

from conftest import pantry_scene_doc


def det(x0, y0, w=100, h=100, label="drawer", confidence=0.9):
    return Detection(
        raw_label=label,
        confidence=confidence,
        polygon=Polygon.from_points([[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]]),
    )


def one_container_table(anchors=(), **kwargs):
    return assemble_table([det(0, 0, **kwargs)], list(anchors), "img", 1000, 1000)


class TestAspect:
    @pytest.mark.parametrize(
        "w,h,expected",
        [
            (200, 100, AspectClass.WIDER_THAN_TALL),
            (100, 100, AspectClass.SQUARE_LIKE),
            (100, 200, AspectClass.TALLER_THAN_WIDE),
            (125, 100, AspectClass.SQUARE_LIKE),  # 1.25 is not > 1.25
            (100, 125, AspectClass.SQUARE_LIKE),  # 0.8 is not < 0.8
        ],
    )
    def test_classes(self, w, h, expected):
        table = one_container_table(w=w, h=h)
        assert compute_aspect(table.containers[0]) is expected


class TestCountertop:
    def band(self):
        return Polygon.from_points([[0, 300], [1000, 300], [1000, 340], [0, 340]])

    def test_above(self):
        table = one_container_table()  # centroid y = 50
        assert countertop_relation(table.containers[0], self.band()) is CountertopRelation.ABOVE

    def test_below(self):
        table = assemble_table([det(0, 450)], [], "img", 1000, 1000)  # centroid y = 500
        assert countertop_relation(table.containers[0], self.band()) is CountertopRelation.BELOW

    def test_absent_is_unknown(self):
        table = one_container_table()
        assert countertop_relation(table.containers[0], None) is CountertopRelation.UNKNOWN

    def test_centroid_inside_band_uses_majority_area(self):
        # centroid y = 310 inside the band; 300 px of bbox height above it, 280 below
        straddling = assemble_table([det(0, 0, w=100, h=620)], [], "img", 1000, 1000)
        assert countertop_relation(straddling.containers[0], self.band()) is CountertopRelation.ABOVE


class TestNeighbors:
    def test_abutting_are_mutual(self):
        table = assemble_table([det(0, 0), det(100, 0)], [], "img", 1000, 1000)
        find_neighbors(table)
        assert table.containers[0].neighbor_local_ids == {2}
        assert table.containers[1].neighbor_local_ids == {1}

    def test_opposite_corners_are_not(self):
        table = assemble_table([det(0, 0), det(890, 890)], [], "img", 1000, 1000)
        find_neighbors(table)
        assert table.containers[0].neighbor_local_ids == set()

    def test_symmetry(self, kitchen_a):
        for c in kitchen_a.containers:
            for n in c.neighbor_local_ids:
                other = kitchen_a.container_by_local_id(n)
                assert c.local_id in other.neighbor_local_ids
                assert n != c.local_id


class TestAnchorRelations:
    def test_singleton_closest(self):
        table = one_container_table(anchors=[det(500, 500, w=80, h=80, label="sink")])
        anchor_relations(table)
        assert table.containers[0].closest_to_anchors == {"sink"}

    def test_two_containers_hand_computed(self):
        # container centroids (50, 50) and (50, 380); oven center at (90, 140):
        # distances sqrt(40^2+90^2)=98.5 and sqrt(40^2+240^2)=243.3
        oven = det(50, 100, w=80, h=80, label="oven")
        table = assemble_table([det(0, 0), det(0, 330)], [oven], "img", 1000, 1000)
        anchor_relations(table)
        first, second = table.containers
        assert first.closest_to_anchors == {"oven"}
        assert second.closest_to_anchors == set()
        assert first.anchor_relations[0].distance == pytest.approx(math.hypot(40, 90))
        assert second.anchor_relations[0].distance == pytest.approx(math.hypot(40, 240))
        assert second.anchor_relations[0].direction is Direction.BELOW

    def test_no_anchors_no_relations(self):
        table = one_container_table()
        anchor_relations(table)
        assert table.containers[0].anchor_relations == []
        assert table.containers[0].closest_to_anchors == set()

    def test_each_anchor_assigned_exactly_once(self, kitchen_a, kitchen_b):
        for table in (kitchen_a, kitchen_b):
            for anchor in table.anchors:
                holders = [
                    c for c in table.containers if anchor.label in c.closest_to_anchors
                ]
                assert len(holders) == 1

    def test_distance_tie_breaks_by_local_id(self):
        # two containers equidistant from the sink between them
        sink = det(200, 0, w=100, h=100, label="sink")
        table = assemble_table([det(0, 0), det(400, 0)], [sink], "img", 1000, 1000)
        anchor_relations(table)
        assert table.containers[0].closest_to_anchors == {"sink"}
        assert table.containers[1].closest_to_anchors == set()


class TestTranslationConsistency:
    def test_features_unchanged_under_offset(self):
        base = featurize(detections_from_dict(pantry_scene_doc()))
        doc = pantry_scene_doc()
        dx, dy = 40, 60
        for entry in doc["containers"] + doc["anchors"]:
            entry["polygon"] = [[x + dx, y + dy] for x, y in entry["polygon"]]
        moved = featurize(detections_from_dict(doc))
        for a, b in zip(base.containers, moved.containers):
            assert a.aspect_class == b.aspect_class
            assert a.countertop_relation == b.countertop_relation
            assert a.neighbor_local_ids == b.neighbor_local_ids
            assert a.closest_to_anchors == b.closest_to_anchors
            assert [r.direction for r in a.anchor_relations] == [
                r.direction for r in b.anchor_relations
            ]

    def test_every_container_fully_featurized(self, kitchen_a):
        for c in kitchen_a.containers:
            assert c.aspect_class is not None
            assert c.countertop_relation is not None
            assert c.label is not None
