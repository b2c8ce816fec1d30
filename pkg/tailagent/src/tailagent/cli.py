"""Command-line trainer: point it at a gateway and learn a routing policy."""

from __future__ import annotations

import argparse
import sys

from .client import GatewayClient, GatewayError
from .training import train


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tailagent",
        description="Train a policy-gradient routing agent against a gateway.",
    )
    parser.add_argument("--gateway", required=True, help="gateway base URL")
    parser.add_argument("--episodes", type=int, default=4000)
    parser.add_argument("--steps", type=int, default=15, help="windows per episode")
    parser.add_argument("--lr", type=float, default=1e-4)
    parser.add_argument("--sigma", type=float, default=0.99, help="discount factor")
    parser.add_argument(
        "--qla",
        action="store_true",
        help="ablation: observe only the queue-statistic features",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="train_out", help="artifact directory")
    parser.add_argument("--trunk-width", type=int, default=2048)
    parser.add_argument("--dropout", type=float, default=0.2)
    parser.add_argument("--weight-decay", type=float, default=1e-4)
    parser.add_argument("--retries", type=int, default=5, help="gateway retries")
    parser.add_argument(
        "--log-every", type=int, default=100, help="progress cadence (0 = silent)"
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    client = GatewayClient(args.gateway, retries=args.retries)
    try:
        result = train(
            client,
            episodes=args.episodes,
            steps=args.steps,
            seed=args.seed,
            qla=args.qla,
            out_dir=args.out,
            lr=args.lr,
            sigma=args.sigma,
            trunk_width=args.trunk_width,
            dropout=args.dropout,
            weight_decay=args.weight_decay,
            log_every=args.log_every,
        )
        tail = result.episode_rewards[-100:]
        print(
            f"trained {args.episodes} episodes "
            f"({'qla' if args.qla else 'full'} state); "
            f"mean reward of last {len(tail)}: {tail.mean():+.3f}; "
            f"artifacts in {args.out}"
        )
        return 0
    except (GatewayError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        try:
            client.delete_session()
        except GatewayError:
            pass
        client.close()


if __name__ == "__main__":
    sys.exit(main())
