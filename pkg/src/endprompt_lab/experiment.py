"""Pipeline helpers shared by the command line and the paired desk experiment.

The paired experiment pretrains one model at a short context with contiguous
positions, fine-tunes two copies on identical text with identical budgets
(one with the two-segment end-prompt plan, one with contiguous positions) and
evaluates both on long-range single-needle retrieval.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as runcfg
from .corpus import RECALL_MARK, synthetic_corpus
from .data import CueSet, SampleSpec, build_samples, default_cues, desk_cues, ingest, shuffled_batches
from .errors import ValidationError
from .evaluate import EvalReport, NiahConfig, eval_retrieval, gen_tasks, make_buckets
from .model import ModelConfig, Params
from .training import Batch, Schedule, TrainResult, train


def model_config(cfg: dict) -> ModelConfig:
    return ModelConfig(**cfg["model"])


def schedule(cfg: dict, max_steps: int | None = None) -> Schedule:
    t = cfg["train"]
    return Schedule(
        lr=t["lr"],
        warmup_steps=t["warmup_steps"],
        max_steps=t["max_steps"] if max_steps is None else max_steps,
        beta1=t["beta1"],
        beta2=t["beta2"],
        grad_clip=t["grad_clip"],
    )


def pretrain_schedule(cfg: dict, steps: int | None = None) -> Schedule:
    p, t = cfg["pretrain"], cfg["train"]
    return Schedule(
        lr=p["lr"],
        warmup_steps=p["warmup_steps"],
        max_steps=p["steps"] if steps is None else steps,
        beta1=t["beta1"],
        beta2=t["beta2"],
        grad_clip=p["grad_clip"],
    )


def cue_set(cfg: dict) -> CueSet:
    return desk_cues() if cfg["data"]["cues"] == "desk" else default_cues()


def corpus_tokens(cfg: dict, n_tokens: int, seed_offset: int = 0, episode_len: int | None = None) -> np.ndarray:
    """``n_tokens`` of corpus text: synthetic episodes or the bytes of a file.

    Synthetic episodes are ``episode_len`` long (default ``data.episode_len``,
    else ``L_pretrain``) so that windows of that size hold whole episodes.
    """
    d = cfg["data"]
    if d["corpus"] == "synthetic":
        ep = episode_len or d["episode_len"] or cfg["plan"]["L_pretrain"]
        return synthetic_corpus(d["corpus_seed"] + seed_offset, n_tokens, ep, ep, copy_fraction=d["copy_fraction"])
    raw = Path(d["corpus"]).read_bytes()
    return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)[:n_tokens]


def make_samples(cfg: dict, seed: int, kind: str | None = None, fixed_cue: str | None = None):
    """Fine-tuning samples; the text and cue draws depend on ``seed`` only, not on ``kind``."""
    p, d = cfg["plan"], cfg["data"]
    kind = kind or p["kind"]
    cues = cue_set(cfg)
    fixed = fixed_cue if fixed_cue is not None else d["fixed_cue"]
    if kind == "full":
        L = p["a"] + cues.max_len if fixed is None else p["a"] + len(cues[fixed])
    else:
        L = p["L"]
    spec = SampleSpec(
        a=p["a"],
        L=L,
        s=runcfg.scale(cfg),
        plan_kind=kind,
        prompt_weight=d["prompt_weight"],
        context_weight=d["context_weight"],
        pose_chunks=p["pose_chunks"],
    )
    windows = ingest(corpus_tokens(cfg, d["n_samples"] * p["a"], seed_offset=1000 + seed, episode_len=p["a"]), p["a"])
    if len(windows) < d["n_samples"]:
        raise ValidationError(f"corpus yields {len(windows)} windows, {d['n_samples']} requested")
    return build_samples(windows, cues, spec, np.random.default_rng(seed), fixed_cue=fixed)


def recall_weights(tokens: np.ndarray, tail: int, filler_weight: float) -> np.ndarray:
    """Weight 1 on the ``tail`` targets after each recall mark, ``filler_weight`` elsewhere."""
    mark = tokens[:, :-1] == RECALL_MARK
    hit = mark.copy()
    for k in range(1, tail):
        hit[:, k:] |= mark[:, :-k]
    return np.where(hit, 1.0, filler_weight)


def pretrain_batches(cfg: dict, steps: int, seed: int) -> list[Batch]:
    """Contiguous windows of ``L_pretrain`` tokens at scale 1, one fresh batch per step."""
    L, B = cfg["plan"]["L_pretrain"], cfg["pretrain"]["batch_size"]
    wins = ingest(corpus_tokens(cfg, L * B * steps, seed_offset=seed), L)
    pos = np.tile(np.arange(L, dtype=np.int64), (B, 1))
    tail = cfg["eval"]["key_len"] + cfg["eval"]["value_len"] + 1
    fw = cfg["pretrain"]["filler_weight"]
    out = []
    for i in range(steps):
        tokens = np.stack(wins[i * B : (i + 1) * B])
        w = np.ones((B, L - 1)) if fw == 1.0 else recall_weights(tokens, tail, fw)
        out.append(Batch(tokens, pos, 1.0, w))
    return out


def pretrain(cfg: dict, seed: int, steps: int | None = None, log_every: int = 0) -> TrainResult:
    steps = cfg["pretrain"]["steps"] if steps is None else steps
    return train(
        model_config(cfg), pretrain_batches(cfg, steps, seed), pretrain_schedule(cfg, steps), seed=seed, log_every=log_every
    )


def finetune(cfg: dict, params: Params, samples, steps: int, seed: int, log_every: int = 0) -> TrainResult:
    batches = shuffled_batches(samples, cfg["train"]["batch_size"], np.random.default_rng(seed))
    return train(model_config(cfg), batches, schedule(cfg, steps), seed=seed, params=params, log_every=log_every)


def niah_config(cfg: dict) -> NiahConfig:
    e = cfg["eval"]
    return NiahConfig(T_eval=e["T_eval"], key_len=e["key_len"], value_len=e["value_len"], depth_fraction=e["depth_fraction"])


def eval_buckets(cfg: dict, b: int) -> list[tuple[int, int]]:
    T = cfg["eval"]["T_eval"]
    if cfg["eval"]["buckets"] == "single":
        return [(0, T - 1)]
    a, L = cfg["plan"]["a"], cfg["plan"]["L"]
    if T != L:
        return [(0, T - 1)]
    return make_buckets(a, b, L)


def evaluate_model(cfg: dict, params: Params, seed: int, model_id: str, b: int | None = None) -> EvalReport:
    b = cue_set(cfg).max_len if b is None else b
    tasks = gen_tasks(seed, niah_config(cfg), cfg["eval"]["n_tasks"])
    return eval_retrieval(
        model_config(cfg),
        params,
        tasks,
        runcfg.scale(cfg),
        model_id=model_id,
        max_L=cfg["plan"]["L"],
        buckets=eval_buckets(cfg, b),
        batch_size=cfg["eval"]["batch_size"],
    )


@dataclass
class ArmResult:
    seed: int
    arm: str
    report: EvalReport
    final_loss: float


def run_arm(cfg: dict, base: Params, kind: str, seed: int, steps: int, fixed_cue: str | None = None) -> ArmResult:
    samples = make_samples(cfg, seed, kind=kind, fixed_cue=fixed_cue)
    res = finetune(cfg, base, samples, steps, seed)
    arm = kind if fixed_cue is None else f"{kind}:{fixed_cue}"
    rep = evaluate_model(cfg, res.state.params, 10_000 + seed, arm)
    return ArmResult(seed, arm, rep, res.metrics[-1].loss_mean if res.metrics else float("nan"))


@dataclass
class DeskResult:
    base: EvalReport  # the pretrained model, interpolated but not fine-tuned
    arms: list[ArmResult]
    base_params: Params

    def arm(self, name: str, seed: int) -> ArmResult:
        for a in self.arms:
            if a.arm == name and a.seed == seed:
                return a
        raise KeyError((name, seed))


def desk_experiment(
    cfg: dict,
    seeds=(0, 1, 2),
    kinds=("endprompt", "full"),
    fixed_cues=(),
    base: Params | None = None,
    log=None,
) -> DeskResult:
    """Pretrain once (unless ``base`` is given), then fine-tune and evaluate every arm per seed.

    ``fixed_cues`` adds end-prompt arms restricted to a single cue each.
    """
    say = log or (lambda msg: None)
    if base is None:
        base = pretrain(cfg, seed=cfg["data"]["corpus_seed"]).state.params
        say("pretraining done")
    base_rep = evaluate_model(cfg, base, 10_000, "pretrained")
    say(f"pretrained accuracy {base_rep.accuracy:.3f}")
    steps = cfg["train"]["max_steps"]
    arms = []
    for seed in seeds:
        for kind in kinds:
            arms.append(run_arm(cfg, base, kind, seed, steps))
            say(f"seed {seed} {arms[-1].arm}: accuracy {arms[-1].report.accuracy:.3f}")
        for cue in fixed_cues:
            arms.append(run_arm(cfg, base, "endprompt", seed, steps, fixed_cue=cue))
            say(f"seed {seed} {arms[-1].arm}: accuracy {arms[-1].report.accuracy:.3f}")
    return DeskResult(base_rep, arms, base)
