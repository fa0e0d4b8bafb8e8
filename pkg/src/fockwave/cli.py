"""Command-line runner: ``fockwave {run,sweep,fit,scatter,oracle,map} [RUNFILE] [flags]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, experiments as ex, runfile as rf
from .fock import FieldCombination, simulate
from .integrator import IntegrationError
from .npacket import NPhotonSpec, simulate_npacket
from .operators import SLH, MultiModeSLH
from .oracle import TimeBinConfig, UnsupportedConfiguration, run_oracle, trace_distance
from .simulate import decay_rate, default_window
from .twomode import TwoModeCombination, simulate_twomode

log = logging.getLogger("fockwave")

EXIT_OK, EXIT_SCHEMA, EXIT_INTEGRATOR = 0, 2, 3

SUBCOMMAND_EXPERIMENT = {"sweep": "excite_sweep", "fit": "scaling_fit", "scatter": "scatter_sweep",
                         "oracle": "oracle_check", "map": "strong_coupling_map"}


# output helpers ------------------------------------------------------------------------

def _write_rows(rows: list[dict], header: list[str], out):
    names = list(dict.fromkeys(k for r in rows for k in r))
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.DictWriter(buf, names, restval="", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    _emit(buf.getvalue(), out)


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _write_meta(doc: dict, results: dict, out):
    meta = {"engine": f"fockwave {__version__}", "config_hash": rf.config_hash(doc),
            "config": doc, **results}
    text = json.dumps(meta, indent=2, default=float) + "\n"
    if out is None:
        if results:
            sys.stdout.write(text)
    else:
        Path(out).with_suffix(".meta.json").write_text(text)


def _record_rows(times, columns: dict) -> list[dict]:
    return [{"t": float(t), **{k: float(np.real(v[i])) for k, v in columns.items()}}
            for i, t in enumerate(times)]


# experiments -----------------------------------------------------------------------------

def run_single(doc: dict, base: Path):
    """Full time series for one configuration; returns ``(rows, results)``."""
    slh = rf.system(doc)
    rho = rf.system_state(doc, slh.dim)
    combos = rf.fields(doc, base)
    over = rf.integrator_overrides(doc)
    phi = float(doc.get("phi", 0.0))
    kinds = {type(c) for c in combos.values()}
    if len(kinds) > 1:
        raise rf.RunFileError("fields", "all fields must be of the same kind")
    kind = kinds.pop()
    if kind is NPhotonSpec:
        if len(combos) > 1:
            raise rf.RunFileError("fields", "N-packet runs take a single field")
        if not isinstance(slh, SLH):
            raise rf.RunFileError("system", "N-packet runs need a single-mode system")
        run = simulate_npacket(slh, next(iter(combos.values())), rho, phi=phi, **over)
    elif kind is TwoModeCombination or isinstance(slh, MultiModeSLH):
        if not isinstance(slh, MultiModeSLH) or slh.modes != 2:
            raise rf.RunFileError("system", "two-mode fields need a two-mode system")
        combos = {k: (c if isinstance(c, TwoModeCombination) else _lift(c)) for k, c in combos.items()}
        xi = rf.packet(doc, base)
        eta = rf.packet(doc, base, "packet2") if "packet2" in doc else None
        run = simulate_twomode(slh, xi, eta, combos, rho, phi=phi,
                               cross_flux=bool(doc.get("cross_flux", False)), **over)
    else:
        run = simulate(slh, rf.packet(doc, base), combos, rho, phi=phi, **over)
    return _record_rows(run.times, run.record.columns), {}


def _lift(c: FieldCombination) -> TwoModeCombination:
    return TwoModeCombination({(m, n, 0, 0): v for (m, n), v in c.coeffs.items()})


def _photons(doc, default):
    return doc.get("sweep", {}).get("photons", default)


def _bandwidths(doc, default):
    spec = doc.get("sweep", {}).get("bandwidths")
    return list(rf.expand_range(spec)) if spec is not None else default


def run_sweep(doc, base):
    rows = ex.run_excite_sweep(_bandwidths(doc, [1.46]), _photons(doc, [1]),
                               gamma=_gamma(doc), workers=doc.get("workers", 1))
    return rows, {}


def _gamma(doc):
    return float(doc.get("system", {}).get("gamma", 1.0))


def run_fit(doc, base):
    table = doc.get("fit", {}).get("table")
    if table:
        with open(base / table) as fh:
            rows = [{k: float(v) for k, v in r.items()}
                    for r in csv.DictReader(line for line in fh if not line.startswith("#"))]
        for r in rows:
            if not {"N", "omega_opt", "P_max"} <= set(r):
                raise rf.RunFileError("fit.table", "table needs columns N, omega_opt, P_max")
    else:
        rows = ex.run_optimum_sweep(_photons(doc, list(range(10, 41))), _gamma(doc),
                                    workers=doc.get("workers", 1))
    p_fit, w_fit = ex.fit_scaling(rows)
    return rows, {"fits": [p_fit.to_json(), w_fit.to_json()]}


def run_scatter(doc, base):
    sysd = doc.get("system", {})
    rows = [ex.scatter_point(o, n, sysd.get("gamma_forward", 0.5), sysd.get("gamma_backward", 0.5))
            for n in _photons(doc, [1]) for o in _bandwidths(doc, [1.0])]
    return sorted(rows, key=lambda r: (r["N"], r["omega"])), {}


def run_map(doc, base):
    m = doc["map"]
    pkt = rf.packet(doc, base)
    ts = rf.expand_range(m["t_centers"])
    vals = ex.strong_coupling_map(pkt, m["photons"], ts, m.get("tau"), _gamma(doc),
                                  m.get("gamma_guided", _gamma(doc)))
    return [{"t_s": float(t), "coupling": float(v)} for t, v in zip(ts, vals)], {}


def run_rabi(doc, base):
    r = doc["rabi"]
    res = ex.run_rabi_rect(r["photons"], r["t_max"], _gamma(doc), r.get("gamma_guided"),
                           r.get("samples", 2001))
    rows = [{"t": float(t), "P_e": float(p)} for t, p in zip(res.times, res.p_e)]
    return rows, {"rabi": {"frequency": res.frequency, "predicted": res.predicted,
                           "method": res.method, "extrema": res.extrema,
                           "full_oscillation": res.full_oscillation, "amplitude": res.amplitude}}


def run_oracle_check(doc, base):
    """Time-bin oracle next to the hierarchy on the same sample times."""
    slh = rf.system(doc)
    rho = rf.system_state(doc, slh.dim)
    combos = rf.fields(doc, base)
    if len(combos) != 1:
        raise rf.RunFileError("fields", "oracle checks take a single field")
    field = next(iter(combos.values()))
    if isinstance(field, FieldCombination):
        diag = {m for (m, n) in field.coeffs if m == n}
        if len(field.coeffs) != 1 or len(diag) != 1:
            raise rf.RunFileError("field", "oracle checks support Fock states only")
        n = diag.pop()
        pkt = rf.packet(doc, base)
        spec, packets = (pkt, n), [pkt]
    elif isinstance(field, NPhotonSpec):
        spec, packets = field, list(field.basis)
    else:
        raise rf.RunFileError("field", "oracle checks support single-mode fields only")
    o = doc["oracle"]
    window = tuple(o.get("window") or default_window(packets, decay_rate(_as_mm(slh))))
    samples = o.get("samples", 11)
    if o["bins"] % (samples - 1):
        raise rf.RunFileError("oracle.samples", "bins must be a multiple of samples - 1")
    tb = TimeBinConfig(o["bins"], window)
    sample_bins = np.linspace(0, tb.bins, samples).round().astype(int)
    try:
        orc = run_oracle(slh, spec, tb, sample_bins, _pure_vector(rho))
    except UnsupportedConfiguration as exc:
        raise rf.RunFileError("system", str(exc)) from None

    over = rf.integrator_overrides(doc)
    over.update(window=window, sample_points=samples)
    if isinstance(field, NPhotonSpec):
        run = simulate_npacket(slh, field, rho, **over)
    else:
        run = simulate(slh, packets[0], field, rho, **over)
    hier_final = run.engine.total_state(run.final_state, run.combos["field"])
    orc_pe, hier_pe = orc.excitation(slh.dim - 1), np.asarray(run["P_e"])
    rows = [{"t": float(t), "P_e": float(orc_pe[i]), "flux1_integrated": float(orc.flux[0][i]),
             "P_e_hierarchy": float(hier_pe[i]),
             "flux1_integrated_hierarchy": float(run["flux1_integrated"][i])}
            for i, t in enumerate(orc.times)]
    return rows, {"oracle": {"bins": tb.bins, "dt_bin": tb.dt_bin, "window": list(window),
                             "max_P_e_difference": float(np.max(np.abs(hier_pe - orc_pe))),
                             "final_trace_distance": trace_distance(orc.states[-1], hier_final),
                             "max_norm_error": float(np.max(np.abs(orc.norms - 1)))}}


def _pure_vector(rho):
    w, v = np.linalg.eigh(rho)
    if w[-1] < 1 - 1e-10:
        raise rf.RunFileError("system_state", "the oracle needs a pure initial system state")
    return v[:, -1]


def _as_mm(slh):
    return slh if isinstance(slh, MultiModeSLH) else MultiModeSLH.from_single(slh)


RUNNERS = {"single_run": run_single, "excite_sweep": run_sweep, "scaling_fit": run_fit,
           "scatter_sweep": run_scatter, "strong_coupling_map": run_map, "rabi_rect": run_rabi,
           "oracle_check": run_oracle_check}


# argument handling --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fockwave", description=__doc__)
    p.add_argument("--version", action="version", version=f"fockwave {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [("run", "run any experiment named in the run file (default single_run)"),
                           ("sweep", "excitation maximum over bandwidths and photon numbers"),
                           ("fit", "per-N bandwidth optimization and power-law fits"),
                           ("scatter", "transmission and reflection for the side-coupled atom"),
                           ("oracle", "time-bin oracle next to the hierarchy"),
                           ("map", "windowed strong-coupling parameter")]:
        s = sub.add_parser(name, help=helptext)
        s.add_argument("runfile", nargs="?", help="JSON run file")
        s.add_argument("-o", "--out", help="CSV output path (metadata goes to the .meta.json sibling)")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a run-file key, e.g. integrator.rtol=1e-9")
        s.add_argument("--omega", type=float, help="Gaussian packet bandwidth")
        s.add_argument("--photons", type=int, nargs="+", help="photon numbers")
        s.add_argument("--bandwidths", type=float, nargs="+", help="bandwidths for sweeps")
        s.add_argument("--workers", type=int, help="worker processes for sweeps")
        s.add_argument("--method", choices=["rk45_adaptive", "rk4_fixed"])
        s.add_argument("--rtol", type=float)
        s.add_argument("--atol", type=float)
        s.add_argument("--bins", type=int, help="oracle time bins")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_document(args) -> tuple[dict, Path]:
    if args.runfile:
        doc, base = rf.load(args.runfile)
    else:
        doc, base = {}, Path.cwd()
    forced = SUBCOMMAND_EXPERIMENT.get(args.command)
    if forced:
        if doc.get("experiment", forced) != forced:
            raise rf.RunFileError("experiment", f"'{args.command}' runs {forced}, file says {doc['experiment']}")
        doc["experiment"] = forced
    doc.setdefault("experiment", "single_run")
    if args.omega is not None:
        doc.setdefault("packet", {"kind": "gaussian"})["omega"] = args.omega
    if args.photons is not None:
        if doc["experiment"] in ("single_run", "oracle_check"):
            doc["field"] = {"fock": args.photons[0]}
            doc.pop("fields", None)
        elif doc["experiment"] == "rabi_rect":
            doc.setdefault("rabi", {})["photons"] = args.photons[0]
        elif doc["experiment"] == "strong_coupling_map":
            doc.setdefault("map", {})["photons"] = args.photons[0]
        else:
            doc.setdefault("sweep", {})["photons"] = args.photons
    if args.bandwidths is not None:
        doc.setdefault("sweep", {})["bandwidths"] = args.bandwidths
    if args.workers is not None:
        doc["workers"] = args.workers
    for key in ("method", "rtol", "atol"):
        if getattr(args, key) is not None:
            doc.setdefault("integrator", {})[key] = getattr(args, key)
    if args.bins is not None:
        doc.setdefault("oracle", {})["bins"] = args.bins
    if args.command == "scatter":
        doc.setdefault("system", {"preset": "waveguide_atom"})
    for assignment in args.set:
        rf.apply_override(doc, assignment)
    if args.out:
        doc["output"] = args.out
    rf.validate(doc)
    rf.check_files(doc, base)
    return doc, base


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        doc, base = resolve_document(args)
        rows, results = RUNNERS[doc["experiment"]](doc, base)
    except rf.RunFileError as exc:
        print(f"fockwave: schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except KeyError as exc:
        print(f"fockwave: schema error: missing key {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (IntegrationError, ex.SweepError) as exc:
        print(f"fockwave: integrator abort: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR
    out = doc.get("output")
    _write_rows(rows, rf.header_lines(doc), out)
    _write_meta(doc, results, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
