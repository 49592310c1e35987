"""Exercise the Python bindings end to end on a small synthetic set."""

import json
import math
import random

import planspace


def room(category, x0, y0, x1, y1):
    return {"category": category, "box": [x0, y0, x1, y1]}


def main():
    rng = random.Random(4)
    points = {f"p{k:02d}": [rng.uniform(0, 1) for _ in range(3)] for k in range(40)}
    ids = sorted(points)

    table = planspace.DistanceTable(ids)
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            table.insert(ids[a], ids[b], math.dist(points[ids[a]], points[ids[b]]))
    assert len(table) == 40 * 39 // 2

    emb, report = planspace.solve(table, dim=3, seed=1, restarts=2)
    assert report["final_stress"] < 1e-10, report
    assert len(emb) == 40 and emb.dim == 3

    nearest = emb.knn(emb.get("p00"), 3, exclude="p00")
    assert len(nearest) == 3 and nearest[0][1] <= nearest[2][1]
    farthest = emb.knn(emb.get("p00"), 1, order="farthest")
    assert farthest[0][1] >= nearest[-1][1]

    target = {i: math.dist(points["p00"], points[i]) for i in ids}
    coord, stress = planspace.insert(emb, target)
    assert math.dist(coord, emb.get("p00")) < 1e-5, (coord, stress)

    labels = planspace.kmeans(emb, 4, seed=2)
    assert set(labels) == set(ids) and set(labels.values()) <= {0, 1, 2, 3}

    assert abs(planspace.cosine_distance([1.0, 2.0], [-1.0, -2.0]) - 2.0) < 1e-12
    assert abs(planspace.cosine_distance([1.0, 2.0], [3.0, 6.0])) < 1e-12

    a = {"id": "a", "rooms": [room("living", 0, 0, 128, 256), room("bedroom", 128, 0, 256, 256)]}
    b = {"id": "b", "rooms": [room("living", 0, 0, 128, 256), room("kitchen", 128, 0, 256, 256)]}
    assert planspace.iou_distance(json.dumps(a), json.dumps(a)) == 0.0
    assert abs(planspace.iou_distance(json.dumps(a), json.dumps(b)) - 0.5) < 1e-12
    assert planspace.iou_distance(json.dumps(a), json.dumps(b), mode="occupancy") == 0.0

    near_copy = {"id": "c", "rooms": [room("living", 0, 0, 129, 256), room("bedroom", 129, 0, 256, 256)]}
    groups = planspace.prune(json.dumps([a, b, near_copy]), threshold=300)
    assert groups == [("a", ["a", "c"])], groups

    try:
        planspace.cosine_distance([0.0, 0.0], [1.0, 0.0])
    except ValueError:
        pass
    else:
        raise AssertionError("zero vector accepted")

    print("smoke ok")


if __name__ == "__main__":
    main()
