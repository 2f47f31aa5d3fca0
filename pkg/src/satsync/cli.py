"""Command-line entry points: run, sweep, selftest.

`sweep` runs one of the preset figure scenarios; `run` reads a YAML
config describing an arbitrary grid; both write `<scenario>.csv` plus a
`<scenario>.manifest` sidecar with the config echo, seed, and a content
hash of the table. Timing goes to the manifest only, so reruns with the
same seed produce byte-identical CSVs.
"""

import dataclasses
import hashlib
import json
import math
from pathlib import Path

import click
import numpy as np
import yaml

from . import experiment, polar, scenarios
from .cem import CemConfig
from .ice import IceConfig

CSV_COLUMNS = (
    "scenario", "mode", "m", "es_n0_db", "quant_bits", "num_candidates",
    "num_elites", "fixed_nfo", "fixed_cpo_rad", "iteration",
    "trials", "degenerate", "rmse_nfo", "rmse_cpo_rad", "crlb_nfo",
    "crlb_cpo_rad", "ber", "fer", "total_bits", "mean_snr_loss_db",
    "mean_best_loss_db",
)


def _format_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".10g")
    return str(v)


def write_csv(rows, path):
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_value(row.get(c)) for c in CSV_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")


def _config_echo(cfg):
    out = dataclasses.asdict(cfg)
    return out


def write_manifest(path, scenario, seed, threads, configs, rows, csv_path):
    digest = hashlib.sha256(Path(csv_path).read_bytes()).hexdigest()
    doc = {
        "scenario": scenario,
        "seed": seed,
        "threads": threads,
        "rows": len(rows),
        "csv_sha256": digest,
        "wall_time_s": [row.get("wall_time_s") for row in rows],
        "grid": [_config_echo(c) for c in configs],
    }
    Path(path).write_text(json.dumps(doc, indent=2, default=str) + "\n")


def _apply_overrides(cfg, overrides):
    """Apply a flat/nested dict of overrides to an ExperimentConfig."""
    plain = dict(overrides)
    ice_over = plain.pop("ice", {})
    cem_over = plain.pop("cem", {})
    cfg = dataclasses.replace(cfg, **plain)
    if ice_over:
        cfg = dataclasses.replace(
            cfg, ice=dataclasses.replace(cfg.ice, **ice_over))
    if cem_over:
        cfg = dataclasses.replace(
            cfg, cem=dataclasses.replace(cfg.cem, **cem_over))
    return cfg


def load_config(path, seed=None):
    """Build the grid-point list from a YAML experiment description.

    Top-level keys set defaults for every point; the optional `sweep`
    list holds per-point overrides (same keys, applied on top).
    """
    doc = yaml.safe_load(Path(path).read_text()) or {}
    sweep = doc.pop("sweep", [{}])
    scenario = doc.get("scenario", "custom")
    if seed is not None:
        doc["seed"] = seed
    base = _apply_overrides(experiment.ExperimentConfig(), doc)
    return scenario, [_apply_overrides(base, p) for p in sweep]


def _execute(scenario, configs, out_dir, seed, threads):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = experiment.run_experiment(configs, threads=threads)
    csv_path = out / f"{scenario}.csv"
    write_csv(rows, csv_path)
    write_manifest(out / f"{scenario}.manifest", scenario, seed, threads,
                   configs, rows, csv_path)
    click.echo(f"wrote {csv_path} ({len(rows)} rows)")


@click.group()
def main():
    """Multi-satellite joint CFO/CPO estimation experiments."""


@main.command("run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None,
              help="Override the config's master seed.")
@click.option("--threads", type=int, default=1)
def run_cmd(config_path, out_dir, seed, threads):
    """Run the experiment grid described by a YAML config file."""
    scenario, configs = load_config(config_path, seed=seed)
    eff_seed = configs[0].seed if configs else seed
    _execute(scenario, configs, out_dir, eff_seed, threads)


@main.command("sweep")
@click.option("--scenario", required=True,
              type=click.Choice(sorted(scenarios.SCENARIOS)))
@click.option("--out", "out_dir", default=".", type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=1234)
@click.option("--threads", type=int, default=1)
def sweep_cmd(scenario, out_dir, seed, threads):
    """Run one of the preset figure scenarios."""
    configs = scenarios.build_scenario(scenario, seed)
    _execute(scenario, configs, out_dir, seed, threads)


def run_selftest():
    """Fast oracle suite; returns (num_failed, report lines)."""
    from . import cem, ice
    from .softcombine import estimate_snr_ca, square_law_phase
    from .txchain import build_frame

    checks = []

    def check(name, ok, margin):
        checks.append((name, bool(ok), margin))

    rng = np.random.default_rng(7)
    code = polar.construct_code(256, 128, design_snr_db=0.0)

    # encode -> noiseless decode round trip
    ok = True
    for _ in range(20):
        u = rng.integers(0, 2, code.info_length).astype(np.uint8)
        llrs = 20.0 * build_frame(code, u)
        dec = polar.bp_decode(code, llrs, 30)
        ok &= bool(np.array_equal(dec.info_hat, u))
    check("polar encode/decode round trip", ok, "exact")

    # cross-entropy update arithmetic against hand computation
    p = np.array([0.5, 0.5, 0.5, 0.5])
    elites = np.array([[1, 0, 1, 0], [1, 1, 0, 0]])
    got = ice.update_probability(p, elites, 0.8)
    want = (1.0 - 0.8) * p + 0.8 * np.array([1.0, 0.5, 0.5, 0.0])
    err = float(np.max(np.abs(got - want)))
    check("cross-entropy probability update", err == 0.0, f"max err {err:g}")

    # Gray/binary cell index encodings invert each other
    v = np.arange(64)
    ok = True
    for coding in ("gray", "binary"):
        bits = ice.cell_index_to_bits(v, 6, coding)
        ok &= bool(np.array_equal(ice.bits_to_cell_index(bits, coding), v))
    check("cell-index bit codings invert", ok, "exact")

    # square-law phase exact on noiseless CFO-free frames
    worst = 0.0
    for _ in range(10):
        u = rng.integers(0, 2, code.info_length).astype(np.uint8)
        s = build_frame(code, u)
        phi = float(rng.uniform(-np.pi / 2 + 0.01, np.pi / 2 - 0.01))
        frame = s * np.exp(1j * phi)
        worst = max(worst, abs(square_law_phase(frame, 0.0, 1e-3) - phi))
    check("square-law phase exactness", worst < 1e-6, f"max err {worst:.2e}")

    # M-step frequency against a 10x finer brute-force grid
    cfg = cem.CemConfig(grid_points=65,
                        residual_half_width=cem.residual_half_width_hz(
                            1000.0, 64, 6))
    step = 2 * cfg.residual_half_width / (cfg.grid_points - 1)
    worst = 0.0
    for _ in range(20):
        u = rng.integers(0, 2, code.info_length).astype(np.uint8)
        s = build_frame(code, u)
        f_true = float(rng.uniform(-0.9, 0.9) * cfg.residual_half_width)
        k = np.arange(len(s))
        frame = s * np.exp(2j * np.pi * k * f_true * 1e-3) \
            + 0.1 * (rng.normal(size=len(s)) + 1j * rng.normal(size=len(s)))
        got = cem.m_step_frequency(frame, s, cfg, 1e-3)
        fine = np.linspace(-cfg.residual_half_width, cfg.residual_half_width,
                           10 * (cfg.grid_points - 1) + 1)
        mags = np.abs(cem._correlation(frame, s, fine, 1e-3))
        brute = float(fine[np.argmax(mags)])
        worst = max(worst, abs(got - brute))
    check("m_step_frequency vs brute force", worst <= step, f"gap {worst:.2e}")

    # code-aided SNR estimate with genie decisions
    meds = []
    for snr_db in (0.0, 3.0):
        errs = []
        for _ in range(10):
            u = rng.integers(0, 2, code.info_length).astype(np.uint8)
            s = build_frame(code, u)
            s = np.tile(s, 4)[:1024]
            n0 = 10 ** (-snr_db / 10.0)
            frame = s + np.sqrt(n0 / 2) * (rng.normal(size=1024)
                                           + 1j * rng.normal(size=1024))
            est_db = 10 * np.log10(estimate_snr_ca(frame, s))
            errs.append(est_db - snr_db)
        meds.append(abs(float(np.median(errs))))
    worst = max(meds)
    check("code-aided SNR estimate (genie)", worst <= 0.5,
          f"median |err| {worst:.2f} dB")

    failed = sum(1 for _, ok, _ in checks if not ok)
    lines = [f"[{'PASS' if ok else 'FAIL'}] {name} ({margin})"
             for name, ok, margin in checks]
    return failed, lines


@main.command("selftest")
def selftest_cmd():
    """Run the built-in oracle suite."""
    failed, lines = run_selftest()
    for line in lines:
        click.echo(line)
    if failed:
        raise SystemExit(f"{failed} selftest check(s) failed")
    click.echo("all selftest checks passed")


if __name__ == "__main__":
    main()
