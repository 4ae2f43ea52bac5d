"""Command-line entry point: ``todgap <command> --config run.yaml``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .agent import AgentError
from .analysis.experiments import InjectionAborted
from .annotators import AnnotationError
from .config import ConfigError, load_config
from .corpus import CorpusError
from .gateway import GatewayError
from .judge import JudgeError
from .pipeline import COMMANDS, PrerequisiteError, Run, ValidationFailure, pipeline_commands

EXIT_OK, EXIT_CONFIG, EXIT_PREREQ, EXIT_PROVIDER, EXIT_VALIDATION = 0, 2, 3, 4, 5

HELP = {
    "ingest": "load corpora, write normalized transcripts and corpus statistics",
    "generate": "regenerate every expert turn with each agent model (teacher forcing)",
    "annotate": "label human and agent turns with dialog acts and tools",
    "judge": "score agent responses on coherence, specificity, satisfaction, effectiveness",
    "analyze": "behavior gaps, knowledge usage, complexity and alignment split",
    "inject": "behavior-injection experiment (human acts or tools in the prompt)",
    "report": "assemble report.json and the per-figure CSV tables",
    "validate-classifiers": "micro-F1 of the act and tool classifiers against gold labels",
    "run": "every enabled stage in order",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", required=True, help="run configuration (YAML)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--max-parallel", type=int, help="override provider.max_parallel")
    common.add_argument("--provider", choices=("scripted", "http"), help="override provider.kind")
    common.add_argument("--output-dir", help="override output_dir")
    common.add_argument("--force", action="store_true",
                        help="overwrite outputs produced under a different configuration")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="todgap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "run"):
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        # a command-line path is relative to the working directory, not the config folder
        output_dir = str(Path(args.output_dir).resolve()) if args.output_dir else None
        cfg = load_config(args.config, {"seed": args.seed, "provider.max_parallel": args.max_parallel,
                                        "provider.kind": args.provider, "output_dir": output_dir})
        run = Run(cfg, force=args.force)
        commands = pipeline_commands(cfg) if args.command == "run" else [args.command]
        for command in commands:
            ran = run.run_stage(command)
            print(f"{command}: {'done' if ran else 'already complete, skipped'}")
    except (ConfigError, CorpusError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PrerequisiteError as exc:
        print(f"prerequisite error: {exc}", file=sys.stderr)
        return EXIT_PREREQ
    except (GatewayError, AgentError, AnnotationError, JudgeError, InjectionAborted) as exc:
        print(f"provider failure: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
