"""Command-line entry point: ``socialcritic <subcommand> ...``."""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .artifact import ArtifactStatus, read_artifact
from .critic.backends import BackendConfig
from .errors import SocialCriticError
from .kinesim.dataset import build_visual_dataset
from .kinesim.render import FULL_SIZE, ZOOM_SIZE, Camera, render_pose
from .mjcf import load_mjcf, summarize_morphology
from .pipeline import joint_table
from .plan import InteractionContext
from .ras import RasConfig
from .runner import (
    DEFAULT_MAX_REPLANS,
    EXIT_ERROR,
    EXIT_OK,
    RunConfig,
    Runner,
    StageFailure,
    Variant,
    load_oracle_targets,
)

DEFAULT_CRITIC_MODEL = "gpt-4o"


def _add_model(p: argparse.ArgumentParser, repeat: bool = False) -> None:
    if repeat:
        p.add_argument("--model", action="append", required=True, help="MJCF file (repeatable)")
    else:
        p.add_argument("--model", required=True, help="MJCF file")


def _add_render(p: argparse.ArgumentParser) -> None:
    p.add_argument("--full-size", type=int, default=FULL_SIZE, help="full-view image size in pixels")
    p.add_argument("--zoom-size", type=int, default=ZOOM_SIZE, help="zoom-view image size in pixels")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")


def _add_backend(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("critic backend")
    g.add_argument("--backend", choices=("http", "scripted", "oracle"), default="scripted")
    g.add_argument("--endpoint", help="OpenAI-compatible base URL (http backend)")
    g.add_argument("--critic-model", default=DEFAULT_CRITIC_MODEL, help="model identifier (http backend)")
    g.add_argument("--temperature", type=float, default=0.0)
    g.add_argument("--script", help="JSONL fixture of recorded replies (scripted backend, or oracle fallback)")
    g.add_argument("--oracle-targets", help="JSON {step: {joint: value}} (oracle backend)")


def _add_search(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("refinement")
    d = RasConfig()
    g.add_argument("--tau", type=int, default=d.tau, help="reward that ends a search")
    g.add_argument("--sigma-base", type=float, default=d.sigma_base)
    g.add_argument("--alpha", type=float, default=d.alpha, help="narrowing factor after a near miss")
    g.add_argument("--beta", type=float, default=d.beta, help="widening factor after a poor reward")
    g.add_argument("--max-iterations", type=int, default=d.max_iterations)
    g.add_argument("--max-replans", type=int, default=DEFAULT_MAX_REPLANS)
    g.add_argument("--seed", type=int, default=d.rng_seed)
    g.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.FULL.value)


def _add_context(p: argparse.ArgumentParser, repeat: bool = False) -> None:
    if repeat:
        p.add_argument("--context", action="append", required=True, help="interaction context (repeatable)")
    else:
        p.add_argument("--context", required=True, help="interaction context, e.g. 'A person waves at the robot'")
    p.add_argument("--human-action", help="optional description of the human's action")


def _config_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON file of flag defaults, e.g. {\"endpoint\": ..., \"tau\": 8}")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="socialcritic", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_SubParser)

    p = sub.add_parser("analyze", help="print the joint table and write the range-of-motion dataset")
    _add_model(p)
    p.add_argument("--out", help="dataset directory (default: <model>_dataset)")
    p.add_argument("--no-render", action="store_true", help="write the manifest values only")
    _add_render(p)

    p = sub.add_parser("visualize", help="render one pose to PNG")
    _add_model(p)
    p.add_argument("--pose", help="comma-separated joint values in joint order")
    p.add_argument("--set", action="append", default=[], metavar="JOINT=VALUE", help="override one joint")
    p.add_argument("--view", choices=("full", "zoom"), default="full")
    p.add_argument("--joint", help="joint whose distal links the zoom view frames")
    p.add_argument("--size", type=int)
    p.add_argument("--out", required=True, help="output PNG path")

    for name, text in (
        ("plan", "translate the context and plan timed steps"),
        ("codegen", "generate joint commands for the planned steps"),
        ("evaluate", "render keyframes and ask for a holistic verdict"),
        ("refine", "run one refinement cycle on the latest failing verdict"),
    ):
        p = sub.add_parser(name, help=text)
        _add_model(p)
        if name == "plan":
            _add_context(p)
        p.add_argument("--out", required=True, help="run directory holding artifact.json")
        _add_backend(p)
        _add_search(p)
        _add_render(p)

    p = sub.add_parser("run", help="generate, evaluate and refine until accepted or out of budget")
    _add_model(p, repeat=True)
    _add_context(p, repeat=True)
    p.add_argument("--out", required=True, help="output directory")
    _add_backend(p)
    _add_search(p)
    _add_render(p)
    return parser


class _SubParser(argparse.ArgumentParser):
    def __init__(self, **kw):
        super().__init__(parents=[_config_parser()], **kw)


def apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Turn the entries of ``--config FILE`` into defaults; explicit flags still win."""
    known, _ = _config_parser().parse_known_args(argv)
    if not known.config:
        return
    try:
        entries = json.loads(Path(known.config).read_text())
    except json.JSONDecodeError as exc:
        parser.error(f"config file {known.config}: {exc}")
    if not isinstance(entries, dict):
        parser.error(f"config file {known.config} must hold a JSON object")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    actions = {a.dest: a for p in subparsers.choices.values() for a in p._actions}
    defaults = {}
    for key, value in entries.items():
        dest = key.lstrip("-").replace("-", "_")
        action = actions.get(dest)
        if action is None or dest in ("config", "help", "model", "context", "out"):
            # inputs and outputs name a particular run, so they stay on the command line
            parser.error(f"config file {known.config}: unknown or disallowed setting {key!r}")
        if action.type is not None and value is not None:
            value = action.type(value)
        if action.choices is not None and value not in action.choices:
            parser.error(f"config file {known.config}: {key} must be one of {sorted(action.choices)}")
        defaults[dest] = value
    for p in subparsers.choices.values():
        own = {a.dest for a in p._actions}
        p.set_defaults(**{k: v for k, v in defaults.items() if k in own})


def _backend(args) -> BackendConfig:
    if args.backend == "http":
        return BackendConfig("http", endpoint=args.endpoint, model=args.critic_model, temperature=args.temperature)
    if args.backend == "scripted":
        return BackendConfig("scripted", script_path=args.script, temperature=args.temperature)
    if not args.oracle_targets:
        raise ValueError("the oracle backend needs --oracle-targets")
    return BackendConfig(
        "oracle",
        script_path=args.script,
        oracle_targets=load_oracle_targets(args.oracle_targets),
        temperature=args.temperature,
    )


def _run_config(args, model_path: str, context: str, out: str | None) -> RunConfig:
    ras = RasConfig(
        tau=args.tau,
        sigma_base=args.sigma_base,
        alpha=args.alpha,
        beta=args.beta,
        max_iterations=args.max_iterations,
        rng_seed=args.seed,
    )
    return RunConfig(
        model_path=model_path,
        context=InteractionContext(context, getattr(args, "human_action", None)),
        backend=_backend(args),
        ras=ras,
        variant=Variant(args.variant),
        out_dir=out,
        full_size=args.full_size,
        zoom_size=args.zoom_size,
        max_replans=args.max_replans,
        jobs=args.jobs,
    )


# --- subcommands -------------------------------------------------------------------


def cmd_analyze(args) -> int:
    model = load_mjcf(args.model)
    print(f"model {model.name}: {model.n_joints} joints")
    print(joint_table(model))
    print()
    print(summarize_morphology(model).text)
    dataset = build_visual_dataset(
        model,
        camera=Camera.for_model_file(args.model),
        full_size=args.full_size,
        zoom_size=args.zoom_size,
        render=not args.no_render,
        max_workers=args.jobs,
    )
    out = Path(args.out) if args.out else Path(f"{Path(args.model).stem}_dataset")
    manifest = dataset.write(out)
    for entry in dataset.entries.values():
        if entry.degenerate:
            print(f"note: {entry.joint} samples {', '.join(entry.degenerate)} collapse onto the default")
    print(f"wrote {dataset.image_count()} images and {manifest}")
    return EXIT_OK


def _parse_pose(args, model) -> np.ndarray:
    pose = model.default_array()
    if args.pose:
        values = [float(v) for v in args.pose.split(",")]
        if len(values) != model.n_joints:
            raise ValueError(f"--pose has {len(values)} values, model has {model.n_joints} joints")
        pose = np.array(values)
    for item in args.set:
        name, _, value = item.partition("=")
        pose[model.joint_index(name.strip())] = float(value)
    lo, hi = model.limits_array()
    return np.clip(pose, lo, hi) if model.n_joints else pose


def cmd_visualize(args) -> int:
    model = load_mjcf(args.model)
    pose = _parse_pose(args, model)
    img = render_pose(model, pose, args.view, args.joint, size=args.size, camera=Camera.for_model_file(args.model))
    print(f"wrote {img.save(args.out)}")
    return EXIT_OK


def _stage(args) -> int:
    out = Path(args.out)
    path = out / "artifact.json"
    if args.command == "plan":
        runner = Runner(_run_config(args, args.model, args.context, str(out)))
        artifact = runner.new_artifact()
        runner.plan(artifact)
        for s in artifact.plan.steps:
            print(f"{s.index}. [{s.t_start:g}-{s.t_end:g} s] {s.description}")
    else:
        artifact = read_artifact(path)
        runner = Runner(_run_config(args, args.model, artifact.context.description, str(out)))
        if artifact.robot_hash != runner.model.source_hash:
            raise ValueError(f"{path} was produced for a different model file")
        runner.config = replace(runner.config, context=artifact.context)
        if args.command == "codegen":
            seq = runner.codegen(artifact)
            print(json.dumps({k: [c.joint for c in v] for k, v in seq.per_step.items()}))
        elif args.command == "evaluate":
            critique = runner.evaluate(artifact)
            if critique.passed:
                artifact.status = ArtifactStatus.ACCEPTED
            print(critique.verdict.value + (f": {critique.text}" if critique.text else ""))
        else:
            if not runner.refine(artifact):
                print("every joint failed for a step; nothing left to try")
            for p, o in zip(artifact.proposals, artifact.outcomes):
                status = o.status if o else "applied"
                print(f"{p.kind.value} {p.joint} in step {p.step_index}: {status}")
    runner.write_outputs(artifact, out)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_run(args) -> int:
    pairs = list(itertools.product(args.model, args.context))
    base = Path(args.out)

    def one(n_pair):
        n, (model_path, context) = n_pair
        out = base if len(pairs) == 1 else base / f"{Path(model_path).stem}-{n}"
        config = _run_config(args, model_path, context, str(out))
        if len(pairs) > 1:
            config = replace(config, jobs=1)
        try:
            result = Runner(config).run()
        except StageFailure as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        print(f"{model_path} / {context!r}: {result.reason} after {result.artifact.replans} replans -> {result.artifact_path}")
        return result.exit_code

    if len(pairs) > 1 and args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(one, enumerate(pairs)))
    else:
        codes = [one(p) for p in enumerate(pairs)]
    return EXIT_ERROR if EXIT_ERROR in codes else max(codes)


COMMANDS = {
    "analyze": cmd_analyze,
    "visualize": cmd_visualize,
    "plan": _stage,
    "codegen": _stage,
    "evaluate": _stage,
    "refine": _stage,
    "run": cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    apply_config_file(parser, argv)
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SocialCriticError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
