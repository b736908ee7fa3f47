"""Command-line surface: every pipeline stage emits plot-ready artifacts.

Each subcommand writes CSV/JSON artifacts plus a manifest (config hash,
package and library versions, seed) under the output directory. Identical
config + seed reproduce byte-identical artifacts. Module errors exit nonzero
with a machine-readable error JSON on stdout.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, calibrate, classical, device, fitkit, fock, \
    lindblad, perturbative, response, wigner
from .config import load_config
from .constants import TWO_PI
from .device import CircuitElements, CircuitParams, DriveSpec
from .errors import KerrsimError


def _params(cfg) -> CircuitParams:
    obj = device.params_from_config(cfg["params"])
    if isinstance(obj, CircuitElements):
        raise KerrsimError(
            "this command needs damping rates; use the direct parameter form"
        )
    return obj


def _fmt(v) -> str:
    return f"{v:.17g}"


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _manifest(out: Path, command: str, config_path, seed: int,
              outputs: list) -> None:
    h = hashlib.sha256()
    with open(config_path, "rb") as fh:
        h.update(fh.read())
    _write_json(out / "manifest.json", {
        "command": command,
        "config_sha256": h.hexdigest(),
        "seed": seed,
        "versions": {"kerrsim": __version__, "numpy": np.__version__},
        "outputs": sorted(outputs),
    })


def _dip_grid(params: CircuitParams, power_dbm_source: float,
              attenuation_db: float, span_kappa: float, points: int):
    """Frequency grid centered on the expected dip for one power."""
    eps = device.drive_strength(
        DriveSpec(power_dbm_at_source=power_dbm_source,
                  attenuation_db=attenuation_db, omega_d=0.0), params)
    y = perturbative.amplitude_cardano(params, eps)
    center = params.omega_r - params.K - params.K * y * y
    half = span_kappa * params.kappa
    return np.linspace(center - half, center + half, points)


def _grids(cfg, params, powers, attenuation_db):
    g = cfg.get("frequency_grid", {})
    mode = g.get("mode", "dip")
    if mode == "explicit":
        om = TWO_PI * 1e9 * np.asarray(g["freqs_GHz"], dtype=float)
        return [om for _ in powers]
    span = g.get("span_kappa", 1.2)
    points = g.get("points", 161)
    return [_dip_grid(params, p, attenuation_db, span, points) for p in powers]


def _steady_state_at_dip(cfg, params, power_dbm_source, attenuation_db,
                         strict):
    """Steady state at the amplitude-maximizing detuning for one power."""
    eps = device.drive_strength(
        DriveSpec(power_dbm_at_source=power_dbm_source,
                  attenuation_db=attenuation_db, omega_d=0.0), params)
    dim = cfg.get("solver", {}).get("dim") or fock.adequate_dim(
        2.0 * eps / params.kappa)
    y = perturbative.amplitude_cardano(params, eps)
    a_op = fock.destroy(dim)
    deltas = params.K * y * y + np.linspace(-0.3, 0.3, 13) * params.kappa

    def amp(dq):
        liouv = lindblad.build(params, delta_q=float(dq), epsilon=eps,
                               dim=dim, check_dim=False)
        return abs(fock.expect(a_op, lindblad.steady_state(liouv, strict=strict)))

    amps = np.array([amp(d) for d in deltas])
    i = int(np.argmax(amps))
    i = min(max(i, 1), len(deltas) - 2)
    y0, y1, y2 = amps[i - 1], amps[i], amps[i + 1]
    denom = y2 - 2 * y1 + y0
    dstar = deltas[i] if denom >= 0 else \
        deltas[i] + 0.5 * (deltas[i + 1] - deltas[i]) * (y0 - y2) / denom
    liouv = lindblad.build(params, delta_q=float(dstar), epsilon=eps, dim=dim,
                           check_dim=False)
    return lindblad.steady_state(liouv, strict=strict), liouv, eps, dim


def cmd_quantize(cfg, out, args):
    obj = device.params_from_config(cfg["params"])
    if isinstance(obj, CircuitParams):
        omega_r, K = obj.omega_r, obj.K
    else:
        omega_r, K = device.quantize(obj)
    _write_json(out / "quantize.json", {
        "omega_r_rad_s": omega_r, "K_rad_s": K,
        "f_r_GHz": omega_r / TWO_PI / 1e9, "K_kHz": K / TWO_PI / 1e3,
        "units": {"omega_r_rad_s": "rad/s", "K_rad_s": "rad/s",
                  "f_r_GHz": "GHz (ordinary)", "K_kHz": "kHz (ordinary)"},
    })
    return ["quantize.json"]


def cmd_sweep(cfg, out, args):
    params = _params(cfg)
    drive_cfg = cfg["drive"]
    powers = drive_cfg["powers_dbm"]
    att = drive_cfg.get("attenuation_db", 0.0)
    grids = _grids(cfg, params, powers, att)
    gamma = perturbative.gamma_nl(params)
    outputs, summaries = [], []
    for power, om in zip(powers, grids):
        drive = DriveSpec(power_dbm_at_source=power, attenuation_db=att,
                          omega_d=om)
        trace = response.sweep(args.backend.replace("-", "_"), params, drive,
                               gamma_nl=gamma, strict=args.strict,
                               threads=args.threads,
                               dim=cfg.get("solver", {}).get("dim"))
        name = f"trace_{args.backend}_{power:+.1f}dbm.csv"
        _write_csv(out / name, "power_dbm,freq_Hz,re_s21,im_s21,abs_s21",
                   response.trace_to_rows(trace))
        outputs.append(name)
        summary = response.extract_min(trace, params)
        summaries.append({
            "power_dbm_at_device": trace.power_dbm,
            "min_abs_s21": summary.min_abs_s21,
            "omega_min_rad_s": summary.omega_min,
            "f_min_GHz": summary.omega_min / TWO_PI / 1e9,
            "kappa_int_eff_kHz": summary.kappa_int_eff / TWO_PI / 1e3,
        })
    _write_json(out / "sweep_summary.json", {
        "backend": args.backend, "dips": summaries,
        "units": {"kappa_int_eff_kHz": "kHz (ordinary)"},
    })
    return outputs + ["sweep_summary.json"]


def cmd_dip_summary(cfg, out, args):
    params = _params(cfg)
    ds = _load_dataset(cfg)
    dips = []
    for p, f, s in zip(ds.powers_dbm, ds.freqs_hz, ds.s21):
        trace = response.SweepTrace(power_dbm=p, omega_d=TWO_PI * np.asarray(f),
                                    s21=np.asarray(s), backend="quantum")
        d = response.extract_min(trace, params)
        dips.append({"power_dbm": p, "min_abs_s21": d.min_abs_s21,
                     "f_min_GHz": d.omega_min / TWO_PI / 1e9,
                     "kappa_int_eff_kHz": d.kappa_int_eff / TWO_PI / 1e3})
    _write_json(out / "dip_summary.json", {"dips": dips})
    return ["dip_summary.json"]


def _emit_field(out, stem, fieldw, params, extras):
    grid = fieldw.grid
    X, P = grid.meshes()
    cols = ["x", "p", "W"]
    arrays = [X.ravel(), P.ravel(), fieldw.W.ravel()]
    for name in wigner.CURRENT_NAMES:
        if name in fieldw.currents:
            cols += [f"Jx_{name}", f"Jp_{name}"]
            arrays += [fieldw.currents[name][0].ravel(),
                       fieldw.currents[name][1].ravel()]
    _write_csv(out / f"{stem}.csv", ",".join(cols), zip(*arrays))
    sidecar = {
        "grid": {"nx": grid.x.size, "np": grid.p.size,
                 "x_min": float(grid.x[0]), "x_max": float(grid.x[-1]),
                 "p_min": float(grid.p[0]), "p_max": float(grid.p[-1])},
        "params": {"omega_r_rad_s": params.omega_r,
                   "kappa_int_rad_s": params.kappa_int,
                   "kappa_ext_rad_s": params.kappa_ext,
                   "K_rad_s": params.K, "n_th": params.n_th},
        "units": {"currents_csv": "rad/s x probability density",
                  "integrals_MHz": "MHz (ordinary frequency, value/2pi/1e6)"},
    }
    sidecar.update(extras)
    if fieldw.currents:
        ints = wigner.current_integrals(fieldw)
        sidecar["integrals_MHz"] = {k: v / TWO_PI / 1e6 for k, v in ints.items()}
    _write_json(out / f"{stem}.json", sidecar)
    return [f"{stem}.csv", f"{stem}.json"]


def cmd_wigner(cfg, out, args):
    params = _params(cfg)
    drive_cfg = cfg["drive"]
    att = drive_cfg.get("attenuation_db", 0.0)
    outputs = []
    ps_cfg = cfg.get("phase_space", {})
    for power in drive_cfg["powers_dbm"]:
        rho, liouv, eps, dim = _steady_state_at_dip(cfg, params, power, att,
                                                    args.strict)
        grid = wigner.PhaseSpaceGrid.for_amplitude(
            2.0 * eps / params.kappa, n=ps_cfg.get("points", 201),
            pad=ps_cfg.get("pad", 5.0))
        f = wigner.wigner_grid(rho, grid)
        extras = {"power_dbm_at_device": power - att,
                  "delta_q_rad_s": liouv.delta_q, "epsilon_rad_s": eps,
                  "dim": dim}
        if args.currents:
            f = wigner.currents(f, params, delta=liouv.delta_q, epsilon=eps)
        outputs += _emit_field(out, f"wigner_{power:+.1f}dbm", f, params, extras)
    return outputs


def cmd_deform(cfg, out, args):
    params = _params(cfg)
    drive_cfg = cfg["drive"]
    att = drive_cfg.get("attenuation_db", 0.0)
    d_cfg = cfg.get("deform", {})
    lam = d_cfg.get("lambda", 22.5751)
    duration_k = d_cfg.get("duration_K", 1.0 / 45.0)
    outputs = []
    for power in drive_cfg["powers_dbm"]:
        rho_ss, liouv, eps, dim = _steady_state_at_dip(cfg, params, power, att,
                                                       args.strict)
        a_op = fock.destroy(dim)
        if d_cfg.get("amplitude", "steady_state") == "steady_state":
            al = abs(fock.expect(a_op, rho_ss))
        else:
            al = 2.0 * eps / params.kappa
        eps_matched = 0.5 * params.kappa * al
        rho = wigner.kerr_deform(al, params, lam, duration_k / params.K,
                                 dim=dim)
        amp0 = al
        amp1 = abs(fock.expect(a_op, rho))
        n0 = al * al
        n1 = fock.expect(a_op.conj().T @ a_op, rho).real
        grid = wigner.PhaseSpaceGrid.for_amplitude(
            2.0 * eps / params.kappa,
            n=cfg.get("phase_space", {}).get("points", 201),
            pad=cfg.get("phase_space", {}).get("pad", 5.0))
        f = wigner.currents(wigner.wigner_grid(rho, grid), params,
                            delta=liouv.delta_q, epsilon=eps_matched)
        extras = {
            "power_dbm_at_device": power - att,
            "deform_lambda": lam, "duration_s": duration_k / params.K,
            "coherent_amplitude": al, "epsilon_matched_rad_s": eps_matched,
            "amplitude_drop_percent": 100.0 * (1.0 - amp1 / amp0),
            "photon_number_initial": n0, "photon_number_final": n1,
        }
        outputs += _emit_field(out, f"deform_{power:+.1f}dbm", f, params, extras)
    return outputs


def cmd_evolve(cfg, out, args):
    params = _params(cfg)
    drive_cfg = cfg["drive"]
    att = drive_cfg.get("attenuation_db", 0.0)
    e_cfg = cfg.get("evolve", {})
    outputs = []
    for power in drive_cfg["powers_dbm"]:
        rho_ss, liouv, eps, dim = _steady_state_at_dip(cfg, params, power, att,
                                                       args.strict)
        alpha = 2.0 * eps / params.kappa
        rho0 = fock.ket_to_dm(fock.coherent_ket(dim, alpha))
        times = np.linspace(0.0, e_cfg.get("t_final_kappa", 6.0) / params.kappa,
                            e_cfg.get("points", 121))
        rec = lindblad.evolve(liouv, rho0, times)
        name = f"evolve_{power:+.1f}dbm.csv"
        rows = zip(rec.times, rec.amp.real, rec.amp.imag, rec.photon,
                   rec.phase_var,
                   rec.rate_split["amp_abs"][:, 0], rec.rate_split["amp_abs"][:, 1],
                   rec.rate_split["photon"][:, 0], rec.rate_split["photon"][:, 1],
                   rec.rate_split["phase_var"][:, 0], rec.rate_split["phase_var"][:, 1])
        _write_csv(out / name,
                   "t_s,re_a,im_a,photon,phase_var,"
                   "d_amp_kerr,d_amp_env,d_photon_kerr,d_photon_env,"
                   "d_phase_kerr,d_phase_env", rows)
        outputs.append(name)
    _write_json(out / "evolve.json", {
        "units": {"t_s": "s", "rates": "per second",
                  "kerr": "detuning+Kerr commutator",
                  "env": "drive + dissipation"}})
    return outputs + ["evolve.json"]


def cmd_squeeze(cfg, out, args):
    params = _params(cfg)
    drive_cfg = cfg["drive"]
    att = drive_cfg.get("attenuation_db", 0.0)
    thetas = np.linspace(-np.pi / 2, np.pi / 2,
                         cfg.get("squeeze", {}).get("theta_points", 181),
                         endpoint=False)
    results, outputs = [], []
    for power in drive_cfg["powers_dbm"]:
        rho, liouv, eps, dim = _steady_state_at_dip(cfg, params, power, att,
                                                    args.strict)
        theta_min, du_min, curve = wigner.squeeze_scan(rho, thetas)
        name = f"squeeze_{power:+.1f}dbm.csv"
        _write_csv(out / name, "theta_rad,du_rel", zip(thetas, curve))
        outputs.append(name)
        results.append({"power_dbm_at_device": power - att,
                        "theta_min_rad": theta_min, "du_min_rel": du_min})
    _write_json(out / "squeeze.json", {"results": results})
    return outputs + ["squeeze.json"]


def _load_dataset(cfg) -> calibrate.RawDataset:
    d = cfg["dataset"]
    if d.get("format", "csv") == "json":
        return calibrate.read_dataset_json(d["path"])
    return calibrate.read_dataset_csv(d["path"])


def cmd_calibrate(cfg, out, args):
    ds = _load_dataset(cfg)
    f, s = ds.trace(ds.lowest_power)
    bl = calibrate.fit_baseline(f, s)
    corrected = calibrate.apply_baseline(ds, bl)
    _write_json(out / "baseline.json", bl.to_json())
    calibrate.write_dataset_csv(corrected, out / "calibrated.csv")
    return ["baseline.json", "calibrated.csv"]


def cmd_decimate(cfg, out, args):
    ds = _load_dataset(cfg)
    block = cfg["dataset"].get("decimate_block", 10)
    calibrate.write_dataset_csv(calibrate.decimate(ds, block),
                                out / "decimated.csv")
    return ["decimated.csv"]


def cmd_fit(cfg, out, args):
    params = _params(cfg)
    ds = _load_dataset(cfg)
    fit_cfg = cfg.get("fit", {})
    att = cfg.get("drive", {}).get("attenuation_db", 0.0)
    if args.model == "quantum":
        initial = {
            "omega_r": params.omega_r, "kappa_int": params.kappa_int,
            "kappa_ext": params.kappa_ext, "K": params.K,
            "attenuation_db": att,
        }
        initial.update(fit_cfg.get("initial", {}))
        problem = fitkit.quantum_problem(ds, initial, n_th=params.n_th,
                                         threads=args.threads)
    else:
        problem = fitkit.classical_nl_problem(ds, params, att,
                                              threads=args.threads)
    result = fitkit.fit(problem, tol=fit_cfg.get("tol", 1e-6),
                        max_evals=fit_cfg.get("max_evals", 4000),
                        bootstrap=fit_cfg.get("bootstrap", 0), seed=args.seed)
    report = {
        "model": args.model,
        "free": {k: list(v) for k, v in problem.free.items()},
        "fixed": problem.fixed,
        "params": result.params,
        "cost": result.cost,
        "n_evals": result.n_evals,
        "converged": result.converged,
        "per_power_residuals": result.residuals,
        "seed": args.seed,
        "metadata": result.metadata,
    }
    _write_json(out / "fit_report.json", report)
    return ["fit_report.json"]


def cmd_synth(cfg, out, args):
    params = _params(cfg)
    drive_cfg = cfg["drive"]
    att = drive_cfg.get("attenuation_db", 0.0)
    s_cfg = cfg.get("synth", {})
    grids = _grids({"frequency_grid": {
        "span_kappa": s_cfg.get("span_kappa", 1.2),
        "points": s_cfg.get("points", 100)}},
        params, drive_cfg["powers_dbm"], att)
    baseline = None
    if s_cfg.get("baseline"):
        baseline = calibrate.Baseline.from_json(s_cfg["baseline"])
    ds = fitkit.synthesize(params, drive_cfg["powers_dbm"], att,
                           [g / TWO_PI for g in grids],
                           noise_sigma=s_cfg.get("noise_sigma", 0.0),
                           baseline=baseline, seed=args.seed,
                           threads=args.threads)
    calibrate.write_dataset_csv(ds, out / "synthetic.csv")
    return ["synthetic.csv"]


def cmd_bifurcation(cfg, out, args):
    params = _params(cfg)
    b_cfg = cfg.get("bifurcation", {})
    att = cfg.get("drive", {}).get("attenuation_db", 0.0)
    powers = b_cfg.get("powers_dbm", cfg["drive"]["powers_dbm"])
    # classical detuning window [min, max] in MHz; omega_d = resonance - Delta
    span = b_cfg.get("span_mhz", [-1.0, 1.95])
    points = b_cfg.get("points", 201)
    res_cl = classical.classical_resonance(params)
    om = np.linspace(res_cl - TWO_PI * 1e6 * span[1],
                     res_cl - TWO_PI * 1e6 * span[0], points)
    p = classical.bifurcation_power(params, om, powers, attenuation_db=att)
    _write_json(out / "bifurcation.json", {
        "bifurcation_power_dbm": p if p is not None else "none-in-range",
        "powers_dbm": list(map(float, powers)),
        "detuning_span_MHz": span,
    })
    return ["bifurcation.json"]


COMMANDS = {
    "quantize": cmd_quantize,
    "sweep": cmd_sweep,
    "dip-summary": cmd_dip_summary,
    "wigner": cmd_wigner,
    "deform": cmd_deform,
    "evolve": cmd_evolve,
    "squeeze": cmd_squeeze,
    "calibrate": cmd_calibrate,
    "decimate": cmd_decimate,
    "fit": cmd_fit,
    "synth": cmd_synth,
    "bifurcation": cmd_bifurcation,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kerrsim",
        description="Driven-dissipative Kerr oscillator toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--strict", action="store_true",
                       help="truncation warnings become errors")
        p.add_argument("--threads", type=int, default=1)

    for name in COMMANDS:
        p = sub.add_parser(name)
        common(p)
        if name == "sweep":
            p.add_argument("--backend", required=True,
                           choices=["quantum", "classical", "classical-nl",
                                    "perturbative"])
        if name == "wigner":
            p.add_argument("--currents", action="store_true")
        if name == "fit":
            p.add_argument("--model", required=True,
                           choices=["quantum", "classical-nl"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](cfg, out, args)
        _manifest(out, args.command, args.config, args.seed, outputs)
        return 0
    except Exception as exc:  # machine-readable failure contract
        json.dump({"error": {"type": type(exc).__name__, "message": str(exc)}},
                  sys.stdout)
        sys.stdout.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
