"""Command-line driver: file-in, file-out stages of the simulation pipeline.

Subcommands mirror the experiment flow: calibrate a model from annotated
backbone points, simulate pose streams along pressure ramps (optionally
with a pin), detect contact from centrode deviation, estimate the contact
location, and sweep contact locations for the ISA-difference index.

Exit codes: 0 success, 1 I/O or parse failure, 2 rank-deficient fit,
3 non-convergence (best iterate still written).
"""

import argparse
import json
import os
import sys

import numpy as np

from . import centrode as ct
from . import estimation as est
from . import pipeline as pl
from .calibration import fit_modal, load_calibration_csv
from .io import write_csv, write_json
from .modal import DEFAULT_UNIT_SCALE, ModalModel

EXIT_OK = 0
EXIT_IO = 1
EXIT_RANK = 2
EXIT_NOCONV = 3


def _load_model(path) -> ModalModel:
    with open(path) as f:
        return ModalModel.from_json(f.read())


def _parse_contact(text: str):
    """'100@5' -> (s_c=100, q_c=5)."""
    parts = text.split("@")
    if len(parts) != 2:
        raise ValueError(f"contact spec must be s_c@q_c, got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_bounds(text: str):
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"bounds must be lo:hi, got {text!r}")
    return float(parts[0]), float(parts[1])


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def cmd_calibrate(args) -> int:
    try:
        dataset = load_calibration_csv(args.input)
    except (OSError, ValueError) as e:
        print(f"calibrate: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        model, report = fit_modal(dataset, v=args.v, w=args.w,
                                  unit_scale=args.unit_scale)
    except ValueError as e:
        # RankDeficientError or an underdetermined sample count
        print(f"calibrate: {e}", file=sys.stderr)
        return EXIT_RANK
    with open(_out(args, "model.json"), "w", newline="\n") as f:
        f.write(model.to_json() + "\n")
    with open(_out(args, "fit_report.json"), "w", newline="\n") as f:
        f.write(report.to_json() + "\n")
    print(f"calibrated v={model.v} w={model.w} L={model.L:.6g}; "
          f"max point residual {report.max_point_err_mm:.4g} mm")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        model = _load_model(args.model)
        ramp = pl.PressureRamp.parse(args.ramp)
    except (OSError, ValueError, KeyError) as e:
        print(f"simulate: {e}", file=sys.stderr)
        return EXIT_IO
    contact_state = None
    if args.contact is not None:
        try:
            s_c, q_c = _parse_contact(args.contact)
            stream, contact_state = pl.simulate_contact(model, ramp, s_c, q_c)
        except ValueError as e:
            print(f"simulate: {e}", file=sys.stderr)
            return EXIT_IO
    else:
        stream = pl.simulate_free(model, ramp)
    if args.noise_pos > 0 or args.noise_ang > 0:
        stream = pl.add_noise(stream, args.noise_pos, args.noise_ang,
                              seed=args.seed)
    ct.write_pose_stream(_out(args, "pose_stream.csv"), stream)
    if contact_state is not None:
        with open(_out(args, "contact_state.json"), "w", newline="\n") as f:
            f.write(contact_state.to_json() + "\n")
    print(f"wrote {len(stream)} samples")
    return EXIT_OK


def _stream_ramp(stream) -> pl.PressureRamp:
    q = np.asarray([s.q for s in stream])
    step = float(q[1] - q[0]) if len(q) > 1 else 1.0
    return pl.PressureRamp(q_start=float(q[0]), q_end=float(q[-1]), step=step)


def cmd_detect(args) -> int:
    try:
        model = _load_model(args.model)
        stream = ct.read_pose_stream(args.stream)
        if len(stream) < 3:
            raise ValueError("stream too short to difference (need >= 3)")
        sensed = ct.centrode_from_stream(stream)
    except (OSError, ValueError, KeyError) as e:
        print(f"detect: {e}", file=sys.stderr)
        return EXIT_IO
    ramp = _stream_ramp(stream)
    model_trace = pl.model_centrode(model, ramp)
    xi = args.xi
    if xi is None:
        # noise floor of differencing vs analytic centrode on a free run
        free = pl.simulate_free(model, ramp)
        xi = ct.default_threshold(ct.centrode_from_stream(free), model_trace)
    detection = ct.fcd_detect(sensed, model_trace, xi=xi, window=args.window)
    ct.write_centrode(_out(args, "sensed_centrode.csv"), sensed)
    ct.write_centrode(_out(args, "model_centrode.csv"), model_trace)
    q_at_onset = (float(stream[detection.onset_t].q)
                  if detection.detected else None)
    write_json(_out(args, "detection.json"), {
        "detected": detection.detected,
        "onset_t": int(detection.onset_t) if detection.detected else None,
        "q_at_onset": q_at_onset,
        "max_deviation": detection.max_deviation,
    })
    print(f"detected={detection.detected} onset_t={detection.onset_t} "
          f"xi={xi:.6g} max_dev={detection.max_deviation:.6g}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    try:
        model = _load_model(args.model)
        stream = ct.read_pose_stream(args.stream)
        onset = args.onset_t
        if onset is None and args.detection is not None:
            with open(args.detection) as f:
                doc = json.load(f)
            if not doc.get("detected", False):
                raise ValueError("detection result reports no contact")
            onset = int(doc["onset_t"])
        if onset is None:
            onset = 0
        sub = stream[onset:]
        if len(sub) < 3:
            raise ValueError("post-onset stream too short (need >= 3)")
        sensed = ct.centrode_from_stream(sub)
        q_traj = np.asarray([s.q for s in sub])
        bounds = _parse_bounds(args.bounds) if args.bounds else None
        W = est.speed_weights(sensed) if args.speed_weights else None
        problem = est.EstimationProblem(
            model=model, q_traj=q_traj, sensed=sensed, s0=args.s0, W=W,
            bounds=bounds,
            sensed_end_pose=(sub[-1].pose.x, sub[-1].pose.z))
    except (OSError, ValueError, KeyError) as e:
        print(f"estimate: {e}", file=sys.stderr)
        return EXIT_IO
    s_c_est, report = est.estimate_contact(problem, max_iter=args.max_iter)
    write_json(_out(args, "estimation.json"), {
        "s_c_est": report["s_c_est"],
        "iterations": report["iterations"],
        "final_objective": report["final_objective"],
        "end_tip_error_LU": report["end_tip_error_LU"],
        "converged": report["converged"],
    })
    write_csv(_out(args, "estimate_iters.csv"), ["iter", "s_c", "objective"],
              report["trace"])
    print(f"s_c_est={s_c_est:.6g} iterations={report['iterations']} "
          f"end_tip_error_LU={report['end_tip_error_LU']:.6g} "
          f"converged={report['converged']}")
    return EXIT_OK if report["converged"] else EXIT_NOCONV


def cmd_sweep(args) -> int:
    try:
        model = _load_model(args.model)
        ramp = pl.PressureRamp.parse(args.ramp)
        s_values = [float(v) for v in args.s_values.split(",") if v.strip()]
        if not s_values:
            raise ValueError("empty --s-values")
    except (OSError, ValueError, KeyError) as e:
        print(f"sweep: {e}", file=sys.stderr)
        return EXIT_IO
    rows = pl.sweep(model, ramp, s_values, jobs=args.jobs)
    write_csv(_out(args, "sweep.csv"), ["s_c", "max_isa_diff"], rows)
    for s_c, val in rows:
        print(f"s_c={s_c:g}: max ISA difference {val:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bellowkin",
                                description="modal bellow kinematics pipeline")
    p.add_argument("--config", default=None,
                   help="JSON file of flag defaults (long names, no dashes)")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", help="fit a modal model from backbone CSV")
    c.add_argument("--input", required=True)
    c.add_argument("--out-dir", required=True)
    c.add_argument("--v", type=int, default=3)
    c.add_argument("--w", type=int, default=3)
    c.add_argument("--unit-scale", type=float, default=DEFAULT_UNIT_SCALE)
    c.set_defaults(fn=cmd_calibrate)

    s = sub.add_parser("simulate", help="pose stream along a pressure ramp")
    s.add_argument("--model", required=True)
    s.add_argument("--ramp", required=True, help="start:end:step, Psi")
    s.add_argument("--contact", default=None, help="s_c@q_c")
    s.add_argument("--noise-pos", type=float, default=0.0)
    s.add_argument("--noise-ang", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(fn=cmd_simulate)

    d = sub.add_parser("detect", help="centrode-deviation contact detection")
    d.add_argument("--model", required=True)
    d.add_argument("--stream", required=True)
    d.add_argument("--xi", type=float, default=None,
                   help="deviation threshold LU (default: noise floor x 3)")
    d.add_argument("--window", type=int, default=ct.DEFAULT_WINDOW)
    d.add_argument("--out-dir", required=True)
    d.set_defaults(fn=cmd_detect)

    e = sub.add_parser("estimate", help="contact location from centrode gap")
    e.add_argument("--model", required=True)
    e.add_argument("--stream", required=True)
    e.add_argument("--detection", default=None,
                   help="detection.json supplying the onset index")
    e.add_argument("--onset-t", type=int, default=None)
    e.add_argument("--s0", type=float, required=True)
    e.add_argument("--bounds", default=None, help="lo:hi LU")
    e.add_argument("--max-iter", type=int, default=est.LM_MAX_ITER)
    e.add_argument("--speed-weights", action="store_true")
    e.add_argument("--out-dir", required=True)
    e.set_defaults(fn=cmd_estimate)

    w = sub.add_parser("sweep", help="ISA-difference index per contact location")
    w.add_argument("--model", required=True)
    w.add_argument("--ramp", required=True)
    w.add_argument("--s-values", required=True, help="comma list of s_c LU")
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--out-dir", required=True)
    w.set_defaults(fn=cmd_sweep)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # --config supplies defaults (and satisfies required flags); explicit
    # command-line flags still win
    if "--config" in argv:
        try:
            cfg_path = argv[argv.index("--config") + 1]
            with open(cfg_path) as f:
                cfg = json.load(f)
            if not isinstance(cfg, dict):
                raise ValueError("config must be a JSON object")
        except (OSError, ValueError, IndexError) as e:
            print(f"config: {e}", file=sys.stderr)
            return EXIT_IO
        overrides = {key.replace("-", "_"): val for key, val in cfg.items()}
        applied = set()
        for group in parser._subparsers._group_actions:
            for child in group.choices.values():
                for action in child._actions:
                    if action.dest in overrides:
                        action.default = overrides[action.dest]
                        action.required = False
                        applied.add(action.dest)
        unknown = set(overrides) - applied
        if unknown:
            print(f"config: unknown keys {sorted(unknown)}", file=sys.stderr)
            return EXIT_IO
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_IO if e.code not in (0, None) else 0
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
