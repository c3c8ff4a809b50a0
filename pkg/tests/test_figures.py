"""Figure rendering: files appear next to the CSV and are valid PNGs."""

from irsccm.figures import render_sweep_figures
from irsccm.sweep import SweepResult, SweepRow


def synthetic_result() -> SweepResult:
    rows = tuple(
        SweepRow(
            sweep_name="snr", sweep_value=float(s), snr_db=float(s),
            t_frames=50, j_slots=60,
            rem_mean=0.8 + 0.01 * i, rem_se=0.02,
            rate_est_mean=4.0 + i, rate_est_se=0.3,
            rate_true_mean=4.2 + i, rate_true_se=0.2,
            rate_rand_mean=2.0 + 0.5 * i, rate_rand_se=0.4,
            failures=0, wall_ms=0.0,
        )
        for i, s in enumerate((-10, -5, 0, 5))
    )
    return SweepResult("snr", rows)


def test_renders_two_pngs_beside_csv(tmp_path):
    csv_path = tmp_path / "run.csv"
    csv_path.write_text("placeholder\n")
    written = render_sweep_figures(synthetic_result(), csv_path)
    assert [p.name for p in written] == ["run_rem.png", "run_rate.png"]
    for path in written:
        assert path.parent == tmp_path
        blob = path.read_bytes()
        assert blob[:8] == b"\x89PNG\r\n\x1a\n"
        assert len(blob) > 1000
