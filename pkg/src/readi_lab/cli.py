"""Command-line entry point.

    readi-lab <subcommand> --scenario FILE [--seed N] [--set key=value ...] --out DIR

Subcommands run the pipeline up to the named stage: ``simulate`` writes the
encoded channel data, ``beamform`` the full reconstruction, ``readi`` the
low-resolution images, ``emc2`` the motion-compensated compound, ``filter``
an SVD-filtered ensemble and ``metrics`` image-quality numbers. ``demo`` runs
the reference experiments and prints a pass/fail table.

The output directory defaults to ``$READI_LAB_OUT``. Exit status is 0 on
success, 1 on a runtime failure and 2 on a usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, beamform, config, container, experiments, figures, motion, simulate
from .beamform import ComplexImage
from .datasets import DimensionError, EncodedDataset
from .hadamard import sylvester

SUBCOMMANDS = ("simulate", "beamform", "readi", "emc2", "filter", "metrics", "demo")
OUT_ENV = "READI_LAB_OUT"


class UsageError(Exception):
    pass


def write_pgm(path, image: ComplexImage, dynamic_range_db: float = 60.0) -> Path:
    """8-bit binary PGM (P5) of the log-compressed envelope."""
    data = beamform.envelope_log(image, dynamic_range_db)
    path = Path(path)
    path.write_bytes(f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode("ascii") + data.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path} is not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


class Run:
    """Artifacts and metrics of one invocation."""

    def __init__(self, scenario: config.Scenario, out: Path, input_path: Path | None = None):
        self.sc = scenario
        self.out = out
        self.input_path = input_path
        self.rows: list[tuple[str, str, str]] = []
        self._encoded = None
        self._low = None
        self.opts = scenario.config["outputs"]

    @property
    def real_dtype(self):
        return np.float32 if self.sc.precision == "f32" else np.float64

    def metric(self, name: str, value) -> None:
        if isinstance(value, (bool, np.bool_)):
            text = str(int(value))
        elif isinstance(value, (int, np.integer)):
            text = str(int(value))
        else:
            text = repr(float(value))
        self.rows.append((name, self.sc.name, text))

    def write_metrics(self, filename: str = "metrics.csv") -> Path:
        path = self.out / filename
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "scenario", "value"])
            w.writerows(self.rows)
        return path

    def image(self, stem: str, image: ComplexImage, title: str = "") -> None:
        if self.opts["pgm"]:
            write_pgm(self.out / f"{stem}.pgm", image, self.opts["dynamic_range_db"])
        if self.opts["npy"]:
            np.save(self.out / f"{stem}.npy", image.pixels)
        if self.opts["figures"]:
            figures.bmode(image, self.out / f"{stem}.png", self.opts["dynamic_range_db"], title or stem)

    # -- pipeline stages ----------------------------------------------------

    def encoded(self) -> EncodedDataset:
        if self._encoded is None:
            if self.input_path is not None:
                c = container.read_container(self.input_path)
                if c.layout == "multistatic":
                    raise DimensionError("input container holds a multistatic dataset; encoded data is required")
                ds = c.to_dataset()
                enc = ds if isinstance(ds, EncodedDataset) else ds.concatenate()
                if enc.n_events != self.sc.geometry.n_elements or enc.n_rx != self.sc.geometry.n_elements:
                    raise DimensionError(
                        f"geometry.n_elements = {self.sc.geometry.n_elements} but the input has "
                        f"{enc.n_events} events and {enc.n_rx} receive channels")
            else:
                h = sylvester(self.sc.geometry.n_elements)
                enc = simulate.simulate_forces(self.sc.scene, self.sc.geometry, self.sc.pulse, h)
            self._encoded = EncodedDataset(enc.samples.astype(self.real_dtype, copy=False),
                                           enc.sample_rate, enc.start_time)
        return self._encoded

    def low_res(self) -> list[ComplexImage]:
        if self._low is None:
            self._low = beamform.readi_reconstruct(self.encoded(), self.sc.scheme, self.sc.grid,
                                                   self.sc.geometry, self.sc.beamform)
        return self._low

    def forces(self) -> ComplexImage:
        h = sylvester(self.sc.geometry.n_elements)
        return beamform.forces_reconstruct(self.encoded(), h, self.sc.grid, self.sc.geometry, self.sc.beamform)

    def emc2(self) -> tuple[ComplexImage, list]:
        low = self.low_res()
        fields = motion.estimate_fields(low, self.sc.motion)
        return motion.emc2_compensate(low, self.sc.motion, fields), fields

    def quality(self, prefix: str, image: ComplexImage) -> None:
        for axis in ("lateral", "axial"):
            w = analysis.psf_width(image, axis)
            self.metric(f"{prefix}_psf_width_{axis}_m", w.width)
            self.metric(f"{prefix}_psf_width_{axis}_grid_limited", w.grid_limited)
        if self.sc.inside_rois and self.sc.background_rois:
            self.metric(f"{prefix}_gcnr", analysis.gcnr(image, self.sc.inside_rois, self.sc.background_rois))


def cmd_simulate(run: Run) -> None:
    enc = run.encoded()
    path = container.write_container(run.out / "encoded.readi", enc, run.sc.precision)
    run.metric("n_events", enc.n_events)
    run.metric("n_rx", enc.n_rx)
    run.metric("n_samples", enc.n_samples)
    run.metric("container_bytes", path.stat().st_size)


def cmd_beamform(run: Run) -> None:
    img = run.forces()
    run.image("forces", img, "FORCES")
    run.quality("forces", img)


def cmd_readi(run: Run) -> None:
    low = run.low_res()
    for s, im in enumerate(low, 1):
        run.image(f"readi_low_res_{s:02d}", im, f"low-res {s}")
    total = beamform.compound(low)
    run.image("readi", total, "READI compound")
    if run.opts["figures"] and len(low) > 1:
        figures.bmode_panel(low, run.out / "readi_low_res.png", [f"group {s}" for s in range(1, len(low) + 1)],
                            run.opts["dynamic_range_db"])
    run.quality("readi", total)


def cmd_emc2(run: Run) -> None:
    comp, fields = run.emc2()
    plain = beamform.compound(run.low_res())
    run.image("emc2", comp, "EMC2 compound")
    run.image("uncompensated", plain, "uncompensated compound")
    ref = run.low_res()[run.sc.motion.reference_index]
    for s, f in enumerate(fields, 1):
        if f is None:
            continue
        f.to_csv(run.out / f"motion_{s:02d}.csv")
        run.metric(f"motion_{s:02d}_valid_fraction", f.valid_fraction)
        if run.opts["figures"]:
            figures.motion_quiver(f, ref, run.out / f"motion_{s:02d}.png", f"group {s}")
    if run.opts["figures"]:
        figures.lateral_profiles({"uncompensated": plain, "EMC2": comp}, run.out / "emc2_profiles.png")
    run.quality("emc2", comp)
    run.quality("uncompensated", plain)


def cmd_filter(run: Run) -> None:
    sc = run.sc
    n = sc.geometry.n_elements
    h = sylvester(n)
    frames = []
    n_ens = sc.config["filter"]["n_ensembles"]
    for k in range(n_ens):
        if k == 0:
            enc = run.encoded()
        else:
            e = simulate.simulate_forces(sc.scene, sc.geometry, sc.pulse, h, run.encoded().n_samples,
                                         first_event=k * n + 1)
            enc = EncodedDataset(e.samples.astype(run.real_dtype), e.sample_rate, e.start_time)
        frames += beamform.readi_reconstruct(enc, sc.scheme, sc.grid, sc.geometry, sc.beamform)
    ens = analysis.ImageEnsemble(frames, 1.0 / sc.scene.prf * sc.scheme.group_size)
    if len(ens) < 2:
        raise DimensionError("filter needs at least two frames: raise grouping.S or filter.n_ensembles")
    keep = sc.keep if sc.keep is not None else set(range(2, len(ens) + 1))
    filtered = analysis.svd_filter(ens, keep)
    sv = np.linalg.svd(ens.casorati(), compute_uv=False)
    if run.opts["npy"]:
        np.save(run.out / "filtered_frames.npy", np.stack([f.pixels for f in filtered.frames]))
        np.save(run.out / "singular_values.npy", sv)
    power = np.sqrt(np.mean([np.abs(f.pixels) ** 2 for f in filtered.frames], axis=0))
    run.image("filter_power", ComplexImage(sc.grid, power.astype(np.complex128), "power"), "filtered power")
    if run.opts["figures"]:
        figures.singular_values(sv, run.out / "singular_values.png", sorted(keep))
    run.metric("filter_n_frames", len(ens))
    run.metric("filter_n_kept", len(keep))
    run.metric("filter_energy_kept_fraction", filtered.energy() / ens.energy())


def cmd_metrics(run: Run) -> None:
    forces = run.forces()
    run.quality("forces", forces)
    low = run.low_res()
    readi = beamform.compound(low)
    run.quality("readi", readi)
    run.metric("readi_forces_rel_l2", float(np.linalg.norm(readi.pixels - forces.pixels)
                                            / max(np.linalg.norm(forces.pixels), 1e-300)))
    if len(low) > 1:
        comp, fields = run.emc2()
        run.quality("emc2", comp)
        for s, f in enumerate(fields, 1):
            if f is not None:
                run.metric(f"motion_{s:02d}_valid_fraction", f.valid_fraction)


def cmd_demo(run: Run | None, out: Path, selected) -> list:
    rows = []
    print(f"{'criterion':<10} {'result':<6} {'time [s]':>9}  name")
    results = []
    for k in selected:
        r = experiments.CRITERIA[k]()
        results.append(r)
        print(f"{k:<10} {'PASS' if r.passed else 'FAIL':<6} {r.elapsed:>9.1f}  {r.name}", flush=True)
        for check, ok in r.checks.items():
            print(f"{'':<10} {'ok' if ok else 'FAIL':<6} {'':>9}    {check}")
        for key, val in r.values.items():
            rows.append((f"c{k}_{key}", "demo", repr(float(val))))
        rows.append((f"c{k}_passed", "demo", str(int(r.passed))))
    with open(out / "demo.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "scenario", "value"])
        w.writerows(rows)
    figures.criteria_table([(f"{r.number}. {r.name}", r.passed) for r in results], out / "demo_criteria.png")
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return results


COMMANDS = {"simulate": cmd_simulate, "beamform": cmd_beamform, "readi": cmd_readi,
            "emc2": cmd_emc2, "filter": cmd_filter, "metrics": cmd_metrics}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="readi-lab", description=__doc__.split("\n\n")[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--scenario", type=Path, help="scenario JSON file (optional for demo)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a scenario field, e.g. --set grouping.S=4 (repeatable)")
    p.add_argument("--out", type=Path, default=None, help=f"output directory (default ${OUT_ENV})")
    p.add_argument("--input", type=Path, default=None, help="encoded container to use instead of simulating")
    p.add_argument("--criteria", default="1-8", help="demo only: criteria to run, e.g. 1,3,5-8")
    return p


def _out_dir(args) -> Path:
    out = args.out or (Path(os.environ[OUT_ENV]) if os.environ.get(OUT_ENV) else None)
    if out is None:
        raise UsageError(f"no output directory: pass --out or set {OUT_ENV}")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")
    return out


def _load_scenario(args) -> config.Scenario:
    if not args.scenario.is_file():
        raise UsageError(f"scenario file not found: {args.scenario}")
    try:
        return config.build(config.load(args.scenario, args.overrides, args.seed))
    except config.ScenarioError as exc:
        raise UsageError(f"{args.scenario}: invalid scenario: {exc}") from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = _out_dir(args)
        if args.subcommand == "demo":
            selected = sorted(analysis.parse_keep(args.criteria))
            bad = [k for k in selected if k not in experiments.CRITERIA]
            if bad:
                raise UsageError(f"--criteria: unknown criteria {bad}")
            if args.scenario is not None:
                sc = _load_scenario(args)
                (out / "resolved_config.json").write_text(json.dumps(sc.config, indent=2, sort_keys=True) + "\n")
            cmd_demo(None, out, selected)
            return 0
        if args.scenario is None:
            raise UsageError("--scenario is required")
        sc = _load_scenario(args)
        (out / "resolved_config.json").write_text(json.dumps(sc.config, indent=2, sort_keys=True) + "\n")
        if args.input is not None and not args.input.is_file():
            raise UsageError(f"input container not found: {args.input}")
        run = Run(sc, out, args.input)
        t0 = time.perf_counter()
        COMMANDS[args.subcommand](run)
        run.write_metrics()
        print(f"readi-lab {args.subcommand}: wrote {out} in {time.perf_counter() - t0:.1f} s")
        return 0
    except UsageError as exc:
        print(f"readi-lab: error: {exc}", file=sys.stderr)
        return 2
    except container.ContainerError as exc:
        print(f"readi-lab: error: {args.input}: {type(exc).__name__} (code {exc.code}): {exc}", file=sys.stderr)
        return 1
    except DimensionError as exc:
        print(f"readi-lab: error: dimension mismatch: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"readi-lab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
