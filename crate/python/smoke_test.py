"""Smoke test for the Python extension.

Builds the extension with cargo (unless EDITBENCH_MODULE points at an already built
shared library), imports it and runs a small pipeline end to end.

    python3 python/smoke_test.py
"""

import os
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build_module(dest: pathlib.Path) -> None:
    built = os.environ.get("EDITBENCH_MODULE")
    if not built:
        subprocess.run(
            ["cargo", "build", "--release", "-p", "editbench-py", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
        target = pathlib.Path(os.environ.get("CARGO_TARGET_DIR", ROOT / "target"))
        ext = {"darwin": "dylib", "win32": "dll"}.get(sys.platform, "so")
        prefix = "" if sys.platform == "win32" else "lib"
        built = target / "release" / f"{prefix}editbench_py.{ext}"
    name = "editbench.pyd" if sys.platform == "win32" else "editbench.so"
    shutil.copy(built, dest / name)


def main() -> None:
    work = pathlib.Path(tempfile.mkdtemp(prefix="editbench-smoke-"))
    try:
        build_module(work)
        sys.path.insert(0, str(work))
        import editbench as eb

        world = eb.World.synth(seed=7)
        assert world.n_facts > 500, world
        assert world.dependencies, "synthetic world should pair relations"

        corpus = eb.Corpus.generate(world, facts=300, seed=7)
        stats = corpus.stats()
        assert stats["atomic_sentences"] == 3000, stats
        assert stats["tf_sentences"] == 3000, stats

        oracle = eb.Oracle.fit(world, corpus)
        atomic = [
            s.strip().rstrip(".").strip()
            for line in corpus.text().splitlines()
            for s in line.split(" . ")
            if s.strip() and not s.startswith('"')
        ]
        sentence = next(s for s in atomic if oracle.min_weight(s, 0.99) > 0)
        p = oracle.query(sentence)
        assert 0.0 < p < 1.0, p
        dist = None
        for cut in range(1, len(sentence.split())):
            try:
                dist = oracle.query(" ".join(sentence.split()[:-cut]))
                break
            except eb.EditbenchError:
                continue
        assert isinstance(dist, dict) and abs(sum(dist.values()) - 1.0) < 1e-12, dist

        snap = oracle.snapshot()
        before = oracle.fingerprint()
        expected = oracle.min_weight(sentence, 0.99)
        w = oracle.edit(sentence, threshold=0.99)
        assert w == expected > 0, (w, expected)
        assert oracle.query(sentence) >= p
        oracle.restore(snap)
        assert oracle.fingerprint() == before

        bench = eb.Bench.generate(world, oracle, n_cases=25, seed=7)
        assert len(bench) == 25
        case = bench.cases()[0]
        assert {"id", "edit", "probes", "targets_pre", "targets_post"} <= set(case), case.keys()

        report = eb.evaluate(bench, oracle, model="bayes")
        assert report.failed == 0
        pre = report.metrics()["all"]["pre"]
        assert all(v is None or v <= 1e-9 for v in pre["probabilistic_mae"].values()), pre
        assert "Pre-edit" in report.table()

        memo = eb.evaluate(bench, corpus=corpus, model="memorizer", subset="all")
        assert memo.metrics()["all"]["pre"]["generative_accuracy"]["s1r1"] == 1.0

        bench.save(str(work / "bench.jsonl"))
        assert len(eb.Bench.load(str(work / "bench.jsonl"))) == 25

        try:
            eb.evaluate(bench, model="bayes")
        except eb.EditbenchError:
            pass
        else:
            raise AssertionError("bayes without an oracle should fail")
        print("python smoke test: ok")
    finally:
        shutil.rmtree(work, ignore_errors=True)


if __name__ == "__main__":
    main()
