"""Exercise the extension end to end on a tiny synthetic dataset."""

import math
import sys
import tempfile
from pathlib import Path

import crossmodal as cm


def main():
    assert cm.class_name(0) is not None
    assert cm.class_name(10_000) is None

    vis = cm.synthesize_visual(3, seed=1)
    tac = cm.synthesize_tactile(3, seed=1)
    assert vis.modality == "visual" and tac.modality == "tactile"
    assert len(vis) > 0 and len(tac) > 0
    print("visual:", vis)
    print("tactile:", tac)

    eq = tac.equalize()
    assert len(eq) > 0

    cfg = cm.Config()
    desc = cm.describe(eq, cfg)
    assert len(desc) > 0 and all(math.isfinite(v) for v in desc)

    cfg.descriptor = "esf"
    cfg.seed = 7
    back = cm.Config.from_toml(cfg.to_toml())
    assert back.descriptor == "esf" and back.seed == 7
    try:
        cfg.classifier = "nonsense"
    except ValueError:
        pass
    else:
        raise AssertionError("bad classifier accepted")

    src = [[math.sin(i * 0.3 + j) for j in range(6)] for i in range(20)]
    tgt = [[math.cos(i * 0.7 + 2 * j) for j in range(6)] for i in range(20)]
    g = cm.gfk_kernel(src, tgt, 2)
    assert len(g) == 6 and all(abs(g[i][j] - g[j][i]) < 1e-9 for i in range(6) for j in range(6))

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        manifest = cm.generate_dataset(tmp / "data", seed=3, classes=3, visual_per_class=4, tactile_per_class=2)
        assert Path(manifest).exists()

        model = cm.Model.train(manifest)
        assert model.classes() == [0, 1, 2]
        label = model.recognize(cm.synthesize_visual(1, seed=99))
        assert label in (0, 1, 2)

        small = cm.Config()
        small.dim = 4
        try:
            cm.Model.adapt_train(manifest)
        except ValueError as e:
            print("default dim on a tiny set:", e)
        adapted = cm.Model.adapt_train(manifest, small)
        path = tmp / "model.json"
        adapted.save(path)
        again = cm.Model.load(path)
        assert again.to_json() == adapted.to_json()

        cloud_path = tmp / "cloud.txt"
        tac.save(cloud_path)
        loaded = cm.PointCloud.load(cloud_path)
        assert loaded.points == tac.points

        try:
            cm.PointCloud.load(tmp / "missing.txt")
        except OSError:
            pass
        else:
            raise AssertionError("missing file loaded")

        csv = cm.benchmark(manifest, tmp / "out", filter="1nn", folds=2)
        assert csv.startswith("config_id")
        assert (tmp / "out" / "results.csv").exists()

    print("smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
