"""``endprompt-lab`` command line.

Exit codes: 0 success, 1 runtime failure, 2 invalid input. Settings resolve as
flags over ``--config`` file over built-in defaults, and the resolved snapshot
is embedded in every artifact written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import checkpoint
from . import config as runcfg
from . import experiment as ex
from ._backend import BACKEND
from .data import read_samples, write_samples
from .errors import InvalidScaleError, LabError, RangeError, ValidationError
from .evaluate import EVAL_ASSUMPTION, EvalReport, compare
from .model import init_params
from .plan import PlanSpec, coverage_report, gap_distances, make_plan
from .rope import decompose, frequencies
from .smoothness import CSV_HEADER, bernstein_check, from_decomposition
from .training import train

THREADS_ENV = "ENDPROMPT_LAB_THREADS"


class UsageError(LabError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config, or the name of a bundled config such as 'smoke'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (stdout when omitted, where that makes sense)")
    p.add_argument("--threads", type=int, default=None, help=f"BLAS threads (also {THREADS_ENV}); default 1")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="endprompt-lab", description="End-prompt context extension lab")
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="coverage report of a position plan")
    _common(p)
    p.add_argument("--a", type=int)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--L", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--kind", choices=("endprompt", "pose", "full"))

    p = sub.add_parser("spectrum", help="rotary frequencies and wavelengths")
    _common(p)
    p.add_argument("--dim", type=int)
    p.add_argument("--base", type=float)
    p.add_argument("--scale", type=float)

    p = sub.add_parser("bernstein", help="certify derivative bounds on random score polynomials")
    _common(p)
    p.add_argument("--dim", type=int)
    p.add_argument("--base", type=float)
    p.add_argument("--scale", type=float)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--L", type=int, help="domain is [0, L-1]")

    p = sub.add_parser("make-data", help="write training samples as JSON lines")
    _common(p)
    p.add_argument("--a", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--kind", choices=("endprompt", "pose", "full"))
    p.add_argument("--n-samples", type=int)
    p.add_argument("--cue", help="pin one cue id for the whole file")

    p = sub.add_parser("train", help="train from a sample file (or pretrain on raw corpus windows)")
    _common(p)
    p.add_argument("--data", help="sample file written by make-data")
    p.add_argument(
        "--pretrain",
        action="store_true",
        help="contiguous corpus windows of L_pretrain at scale 1, using the pretrain section",
    )
    p.add_argument("--init", help="checkpoint to start from")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--metrics", help="metrics CSV path (default: <out>.metrics.csv)")

    p = sub.add_parser("eval", help="single-needle retrieval and distance-bucketed NLL")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--T-eval", type=int, dest="T_eval")
    p.add_argument("--n-tasks", type=int)
    p.add_argument("--depth", type=float)
    p.add_argument("--model-id", default=None)

    p = sub.add_parser("report", help="join eval CSVs into one comparison table")
    _common(p)
    p.add_argument("reports", nargs="+")
    return top


# -- helpers ---------------------------------------------------------------------------

def _resolve(args, overrides: dict) -> dict:
    doc = None
    if args.config:
        path = Path(args.config)
        doc = runcfg.load(path) if path.exists() else runcfg.bundled(args.config)
    return runcfg.resolve(doc, {k: v for k, v in overrides.items() if v is not None})


def _meta(cfg: dict, args, **extra) -> dict:
    return {"config": cfg, "seed": args.seed, **extra}


def _comment(meta: dict) -> str:
    return "# meta " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _require(path: str | None, what: str) -> Path:
    if not path:
        raise UsageError(f"{what} is required")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    return p


# -- commands --------------------------------------------------------------------------

def cmd_plan(args) -> int:
    cfg = _resolve(args, {"plan.a": args.a, "plan.L": args.L, "plan.s": args.s, "plan.kind": args.kind})
    p = cfg["plan"]
    a, b, L, s = p["a"], args.b, p["L"], runcfg.scale(cfg)
    spec = PlanSpec(a, b, L, s)
    plan = make_plan(p["kind"], a, b, L, s, rng=np.random.default_rng(args.seed), chunks=p["pose_chunks"])
    rep = coverage_report(plan, L, a, b)
    _emit(_comment(_meta(cfg, args, b=b)) + rep.to_record() + "\n", args.out)
    lines = [
        f"plan {p['kind']}: a={a} b={b} L={L} s={s:g}",
        f"observed distances: {rep.observed}",
        f"coverage {rep.coverage_fraction:.6f}, widest gap {rep.largest_gap_width}",
    ]
    if spec.gap_condition:
        lines.append(f"gap (closed form): {gap_distances(spec)}")
    else:
        lines.append(f"gap condition unmet: L-a-b={L - a - b} < max(a,b)={max(a, b)}; complement still reported")
    print("\n".join(lines), file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_spectrum(args) -> int:
    cfg = _resolve(args, {"model.rotary_base": args.base, "plan.s": args.scale})
    dim = args.dim if args.dim is not None else ex.model_config(cfg).head_dim
    spec = frequencies(dim, cfg["model"]["rotary_base"])
    s = runcfg.scale(cfg)
    if not s >= 1:
        raise ValidationError(f"scale must be >= 1, got {s}")
    rows = ["j,theta,theta_scaled,wavelength_scaled"]
    for j, th in enumerate(spec.freqs):
        rows.append(f"{j},{th:.9g},{th / s:.9g},{2 * np.pi * s / th:.9g}")
    _emit(_comment(_meta(cfg, args, dim=dim)) + "\n".join(rows) + "\n", args.out)
    return 0


def cmd_bernstein(args) -> int:
    cfg = _resolve(args, {"model.rotary_base": args.base, "plan.s": args.scale, "plan.L": args.L})
    s = runcfg.scale(cfg)
    dim = args.dim if args.dim is not None else ex.model_config(cfg).head_dim
    spec = frequencies(dim, cfg["model"]["rotary_base"])
    if not s >= 1:
        raise InvalidScaleError(f"interpolation scale must be >= 1, got {s}")
    if args.trials < 0:
        raise ValidationError("--trials must be >= 0")
    rng = np.random.default_rng(args.seed)
    rows, failures = [CSV_HEADER], 0
    hi = float(cfg["plan"]["L"] - 1)
    for _ in range(args.trials):
        dec = decompose(rng.normal(size=dim), rng.normal(size=dim), spec)
        rep = bernstein_check(from_decomposition(dec, spec, s), 0.0, hi)
        failures += not (rep.pass1 and rep.pass2)
        rows.append(rep.to_csv_row())
    _emit(_comment(_meta(cfg, args, dim=dim, trials=args.trials)) + "\n".join(rows) + "\n", args.out)
    if failures:
        print(f"{failures} of {args.trials} checks failed certification", file=sys.stderr)
        return 1
    return 0


def cmd_make_data(args) -> int:
    cfg = _resolve(
        args,
        {"plan.a": args.a, "plan.L": args.L, "plan.s": args.s, "plan.kind": args.kind,
         "data.n_samples": args.n_samples, "data.fixed_cue": args.cue},
    )
    out = args.out or "samples.jsonl"
    samples = ex.make_samples(cfg, args.seed)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        write_samples(samples, fh)
    Path(out + ".meta.json").write_text(json.dumps(_meta(cfg, args), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {len(samples)} samples to {out}")
    return 0


def cmd_train(args) -> int:
    if args.pretrain:
        keys = {"pretrain.steps": args.max_steps, "pretrain.lr": args.lr, "pretrain.batch_size": args.batch_size}
    else:
        keys = {"train.max_steps": args.max_steps, "train.lr": args.lr, "train.batch_size": args.batch_size}
    cfg = _resolve(args, keys)
    out = args.out or "model.ckpt"
    mcfg = ex.model_config(cfg)
    if args.init:
        init_cfg, params, _ = checkpoint.load(_require(args.init, "--init checkpoint"))
        if init_cfg != mcfg:
            raise ValidationError("--init checkpoint was built with a different model config")
    else:
        params = init_params(mcfg, args.seed)
    if args.pretrain:
        steps = cfg["pretrain"]["steps"]
        batches = ex.pretrain_batches(cfg, steps, args.seed)
        sched = ex.pretrain_schedule(cfg, steps)
        result = train(mcfg, batches, sched, args.seed, params=params, log_every=cfg["train"]["log_every"])
        source = "pretrain"
    else:
        steps = cfg["train"]["max_steps"]
        data = _require(args.data, "--data sample file")
        with open(data, encoding="utf-8") as fh:
            samples = list(read_samples(fh))
        if not samples:
            raise ValidationError(f"{data} holds no samples")
        result = ex.finetune(cfg, params, samples, steps, args.seed, log_every=cfg["train"]["log_every"])
        source = str(data)
    meta = _meta(cfg, args, data=source, init=args.init, steps=result.state.step, backend=BACKEND)
    checkpoint.save(out, mcfg, result.state.params, meta)
    metrics = args.metrics or out + ".metrics.csv"
    Path(metrics).write_text(result.metrics_csv(), encoding="utf-8")
    last = result.metrics[-1].to_csv() if result.metrics else "no updates"
    print(f"wrote {out} after {result.state.step} steps ({last})")
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve(args, {"eval.T_eval": args.T_eval, "eval.n_tasks": args.n_tasks, "eval.depth_fraction": args.depth})
    if cfg["eval"]["T_eval"] > cfg["plan"]["L"]:
        raise RangeError(f"T_eval={cfg['eval']['T_eval']} exceeds the target context L={cfg['plan']['L']}")
    mcfg, params, _ = checkpoint.load(_require(args.checkpoint, "--checkpoint"))
    cfg["model"] = mcfg.to_dict()
    model_id = args.model_id or Path(args.checkpoint).stem
    rep = ex.evaluate_model(cfg, params, args.seed, model_id)
    meta = _meta(cfg, args, checkpoint=Path(args.checkpoint).name, positions=EVAL_ASSUMPTION)
    _emit(_comment(meta) + rep.to_csv(), args.out)
    return 0


def cmd_report(args) -> int:
    reports = [EvalReport.from_csv(_require(p, "eval report").read_text(encoding="utf-8")) for p in args.reports]
    _emit(compare(reports), args.out)
    return 0


COMMANDS = {
    "plan": cmd_plan,
    "spectrum": cmd_spectrum,
    "bernstein": cmd_bernstein,
    "make-data": cmd_make_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "report": cmd_report,
}


def _thread_count(args) -> int:
    if getattr(args, "threads", None) is not None:
        n = args.threads
    else:
        n = int(os.environ.get(THREADS_ENV, "1"))
    if n < 1:
        raise UsageError("thread count must be >= 1")
    return n


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        n = _thread_count(args)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=n):
            return COMMANDS[args.command](args)
    except (LabError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 2
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
