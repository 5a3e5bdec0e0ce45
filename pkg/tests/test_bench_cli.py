import numpy as np
import pytest

from taskqr import bench
from taskqr.bench import (
    BenchRecord,
    bench_record_row,
    first_mismatch,
    gen_matrix,
    oracle_factorization,
    run_check_grid,
    run_scale,
    run_sweep,
    run_throughput,
    timed_runs,
)
from taskqr.cli import _int_list, _size, main
from taskqr.graph import build_task_graph
from taskqr.schedulers import SchedulerKind


def reference_entry(seed: int, k: int) -> float:
    # plain-integer SplitMix64 finalizer; pins the generator's bit stream
    mask = (1 << 64) - 1
    z = (seed + (k + 1) * 0x9E3779B97F4A7C15) & mask
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & mask
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & mask
    z ^= z >> 31
    return 2.0 * ((z >> 11) * 2.0**-53) - 1.0


def test_gen_matrix_deterministic_bytes():
    assert gen_matrix(4, 4, 42).tobytes() == gen_matrix(4, 4, 42).tobytes()
    assert gen_matrix(4, 4, 42).tobytes() != gen_matrix(4, 4, 43).tobytes()


def test_gen_matrix_matches_reference_mixer():
    mat = gen_matrix(5, 7, seed=42)
    flat = mat.ravel()
    for k in (0, 1, 17, 34):
        assert flat[k] == reference_entry(42, k)
    mat2 = gen_matrix(3, 3, seed=12345)
    assert mat2[2, 2] == reference_entry(12345, 8)


def test_gen_matrix_range_and_shape():
    mat = gen_matrix(300, 300, 1)
    assert mat.shape == (300, 300)
    assert mat.min() >= -1.0 and mat.max() <= 1.0
    assert mat.dtype == np.float64 and mat.flags["C_CONTIGUOUS"]


def test_gen_matrix_dominant_adds_m_to_diagonal():
    plain = gen_matrix(6, 6, 3)
    dom = gen_matrix(6, 6, 3, dominant=True)
    assert np.array_equal(np.diagonal(dom) - np.diagonal(plain), np.full(6, 6.0))
    off = ~np.eye(6, dtype=bool)
    assert np.array_equal(dom[off], plain[off])


def test_gen_matrix_rejects_bad_dims():
    with pytest.raises(ValueError):
        gen_matrix(0, 4, 1)


def test_timed_runs_checked_run_is_correct():
    base = gen_matrix(24, 24, 2)
    graph = build_task_graph(24, 24, 3, 3)
    median, correct = timed_runs(base, graph, SchedulerKind.LOCKFREE, 2, reps=2, check=True)
    assert median > 0
    assert correct is True


def test_first_mismatch_names_position():
    base = gen_matrix(6, 6, 2)
    ref, ref_store = oracle_factorization(base)
    mat = ref.copy()
    store = ref_store.copy()
    assert first_mismatch(mat, store, ref, ref_store) is None
    mat[2, 3] = np.nextafter(mat[2, 3], np.inf)
    msg = first_mismatch(mat, store, ref, ref_store)
    assert "row 2" in msg and "col 3" in msg


def test_run_check_grid_counts_configurations():
    count, failures = run_check_grid(
        [5, 8], [1, 2], [2], [1, 2], [SchedulerKind.BARRIER, SchedulerKind.LOCKFREE], seed=3
    )
    assert count == 2 * 2 * 1 * 2 * 2
    assert failures == []


def test_sweep_rows_cover_grid_for_both_schedulers():
    rows = run_sweep(16, 2, [2, 4], [3], reps=1)
    assert len(rows) == 2 * 2 * 1
    assert {r["scheduler"] for r in rows} == {"lockfree", "priority"}
    assert all(r["median_seconds"] > 0 for r in rows)


def test_scale_and_throughput_row_schemas():
    rows = run_scale([8, 12], 2, 2, 2, reps=1)
    assert len(rows) == 2 * 3
    assert {r["scheduler"] for r in rows} == {"barrier", "lockfree", "priority"}
    rows = run_throughput(12, 2, 2, [2], reps=1)
    assert len(rows) == 3


def test_bench_record_row_format():
    rec = BenchRecord("lockfree", 8, 8, 2, 2, 2, 1, 3, 0.125, True)
    assert bench_record_row(rec) == "lockfree,8,8,2,2,2,1,3,0.125000,true"
    rec.correct = None
    assert bench_record_row(rec).endswith(",0.125000,")


def test_size_and_range_parsing():
    assert _size("300") == (300, 300)
    assert _size("300x200") == (300, 200)
    assert _int_list("1:9:2") == [1, 3, 5, 7, 9]
    assert _int_list("2:32:2") == list(range(2, 33, 2))
    assert _int_list("1,2,4,8") == [1, 2, 4, 8]
    assert _int_list("8") == [8]


@pytest.mark.parametrize(
    "argv",
    [
        ["factor", "--alpha", "0"],
        ["factor", "--beta", "-3"],
        ["factor", "--size", "0"],
        ["sweep", "--threads", "0"],
        ["scale", "--sizes", "0,4"],
        ["throughput", "--threads-range", "0:4:1"],
        ["factor", "--size", "4x4x4"],
        ["check", "--schedulers", "bogus"],
        ["frobnicate"],
    ],
)
def test_cli_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    capsys.readouterr()


def test_cli_check_small_grid_passes(capsys):
    rc = main(
        ["check", "--sizes", "5,9", "--alphas", "1,2", "--betas", "1,3",
         "--threads-list", "1,2", "--seed", "2"]
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert "all byte-identical" in out


def test_cli_check_detects_corrupted_scheduler(capsys, monkeypatch):
    from taskqr.schedulers import EXECUTORS, run_lockfree

    def corrupting_runner(graph, mat, store, threads, **kwargs):
        report = run_lockfree(graph, mat, store, threads, **kwargs)
        mat[0, 0] += 1.0
        return report

    monkeypatch.setitem(EXECUTORS, SchedulerKind.LOCKFREE, corrupting_runner)
    rc = main(["check", "--sizes", "5", "--alphas", "1", "--betas", "1",
               "--threads-list", "1", "--schedulers", "lockfree"])
    out = capsys.readouterr().out
    assert rc == 1
    assert "MISMATCH" in out
    assert "scheduler=lockfree" in out and "size=5" in out and "element 0" in out


def test_cli_sweep_no_time_golden_bytes(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    argv = ["sweep", "--size", "16", "--threads", "2", "--alpha-range", "4",
            "--beta-range", "4", "--reps", "1", "--no-time", "--no-fig",
            "--out", str(out)]
    assert main(argv) == 0
    first = out.read_bytes()
    assert first == (
        b"scheduler,alpha,beta,median_seconds\n"
        b"lockfree,4,4,0.000000\n"
        b"priority,4,4,0.000000\n"
    )
    assert main(argv) == 0
    assert out.read_bytes() == first
    capsys.readouterr()


def test_cli_scale_csv_and_figure(tmp_path, capsys):
    out = tmp_path / "scale.csv"
    rc = main(["scale", "--sizes", "8,12", "--alpha", "2", "--beta", "2",
               "--threads", "2", "--reps", "1", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "scheduler,size,median_seconds"
    assert len(lines) == 1 + 6
    fig = out.with_suffix(".png")
    assert fig.exists() and fig.stat().st_size > 0
    capsys.readouterr()


def test_cli_throughput_single_entry(tmp_path, capsys):
    out = tmp_path / "tp.csv"
    rc = main(["throughput", "--size", "12", "--alpha", "2", "--beta", "2",
               "--threads-range", "2", "--reps", "1", "--no-fig", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "scheduler,threads,median_seconds"
    assert len(lines) == 1 + 3
    assert not out.with_suffix(".png").exists()
    capsys.readouterr()


def test_cli_fig_without_out(tmp_path, capsys):
    fig = tmp_path / "custom.png"
    rc = main(["sweep", "--size", "12", "--threads", "2", "--alpha-range", "2",
               "--beta-range", "2", "--reps", "1", "--fig", str(fig)])
    assert rc == 0
    assert fig.exists() and fig.stat().st_size > 0
    capsys.readouterr()


def test_cli_factor_trace_dot_and_record(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    dot = tmp_path / "graph.dot"
    out = tmp_path / "factor.csv"
    rc = main(["factor", "--size", "5", "--alpha", "1", "--beta", "1",
               "--threads", "2", "--reps", "1", "--check",
               "--trace", str(trace), "--dot", str(dot), "--out", str(out)])
    assert rc == 0
    rows = trace.read_text().splitlines()
    assert rows[0] == "worker,task,start_ns,end_ns"
    assert len(rows) == 1 + 15
    assert all(len(r.split(",")) == 4 for r in rows[1:])
    assert dot.read_text().startswith("digraph")
    record = out.read_text().splitlines()
    assert record[0] == bench.BENCH_HEADER
    assert record[1].startswith("lockfree,5,5,1,1,2,1,1,")
    assert record[1].endswith(",true")
    capsys.readouterr()


def test_cli_factor_check_detects_corruption(tmp_path, capsys, monkeypatch):
    from taskqr.schedulers import EXECUTORS, run_priority

    def corrupting_runner(graph, mat, store, threads, **kwargs):
        report = run_priority(graph, mat, store, threads, **kwargs)
        mat[0, 0] += 1.0
        return report

    monkeypatch.setitem(EXECUTORS, SchedulerKind.PRIORITY, corrupting_runner)
    rc = main(["factor", "--size", "8", "--alpha", "2", "--beta", "2",
               "--scheduler", "priority", "--reps", "1", "--check"])
    assert rc == 1
    capsys.readouterr()


def test_cli_solve_dominant_recovers_ones(capsys):
    rc = main(["solve", "--size", "100", "--dominant", "--seed", "7",
               "--alpha", "5", "--beta", "5", "--threads", "2"])
    out = capsys.readouterr().out
    assert rc == 0
    err = float(out.split("max |x - 1| = ")[1].split(" ")[0])
    assert err <= 1e-10


def test_cli_solve_smallest_system(capsys):
    rc = main(["solve", "--size", "1", "--seed", "1", "--threads", "1"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "solved 1x1" in out


def test_write_csv_roundtrip(tmp_path):
    rows = [{"scheduler": "lockfree", "alpha": 2, "beta": 3, "median_seconds": 0.5}]
    path = tmp_path / "r.csv"
    bench.write_csv(path, bench.SWEEP_HEADER, rows)
    assert path.read_text() == "scheduler,alpha,beta,median_seconds\nlockfree,2,3,0.500000\n"
