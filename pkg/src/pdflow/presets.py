"""Built-in experiment presets.

Each preset hard-codes one published experiment configuration; deviations
require explicit flags so a reproduction stays honest.

example1-fig1      rank-one quadratic with gamma=0.25, delta=9, beta=sqrt(t),
                   eps=3/t^r on [1, 100]; the Tikhonov exponent r is the knob.
example1-strong    same problem family with gamma=10, delta=0.5, beta=sqrt(t)
                   on [1, 30]; eps on (15/t^1.6) selects the minimal-norm
                   solution, eps off shows non-selection.
example2-compare   strongly convex QP on [1, 100]: the Tikhonov primal-dual
                   system with r in {0, 0.1, 0.4} against the second-order-dual
                   and rescaled-ALM baselines, identical all-ones initial data.
rate-order         synthetic strongly convex instance with beta=t^2 and
                   eps=3/t^r2, exercising the power-pair gap-order prediction.
"""

from __future__ import annotations

import copy

from .runspec import SpecError

__all__ = ["PRESET_NAMES", "COMPARE_PRESETS", "build_preset", "preset_help"]

PRESET_NAMES = ("example1-fig1", "example1-strong", "example2-compare", "rate-order")
COMPARE_PRESETS = ("example2-compare",)

_EXAMPLE2_MEMBERS = (
    ("pd-r0", {
        "kind": "tikhonov_pd", "gamma": 10.0, "delta": 0.2,
        "beta": {"family": "power", "c": 1.0, "r": 0.0},
        "eps": {"family": "power", "c": 1.0, "r": 2.0},
    }),
    ("pd-r0.1", {
        "kind": "tikhonov_pd", "gamma": 10.0, "delta": 0.2,
        "beta": {"family": "power", "c": 1.0, "r": 0.1},
        "eps": {"family": "power", "c": 1.0, "r": 2.0},
    }),
    ("pd-r0.4", {
        "kind": "tikhonov_pd", "gamma": 10.0, "delta": 0.2,
        "beta": {"family": "power", "c": 1.0, "r": 0.4},
        "eps": {"family": "power", "c": 1.0, "r": 2.0},
    }),
    ("second-order-dual", {
        "kind": "second_order_dual",
        "gamma": {"family": "power", "c": 10.0, "r": 0.0},
        "delta": {"family": "power", "c": 0.2, "r": 0.0},
    }),
    ("rescaled-alm", {
        "kind": "rescaled_alm",
        "gamma": {"family": "power", "c": 10.0, "r": 0.0},
        "beta": {"family": "power", "c": 1.0, "r": 0.1},
        "a": {"family": "power", "c": 0.2, "r": 0.0},
        "mu": 1.0,
    }),
)


def preset_help() -> str:
    return (
        "presets: example1-fig1 [--r R] [--mned m,n,e,d] [--T T]; "
        "example1-strong [--eps on|off] [--mned m,n,e,d]; "
        "example2-compare [--system NAME] (members: "
        + ", ".join(name for name, _ in _EXAMPLE2_MEMBERS)
        + "); rate-order [--r2 R2]"
    )


def build_preset(name: str, r: float = 1.6, eps: str = "on",
                 mned=(5.0, 1.0, 1.0, 5.0), T: float | None = None,
                 system: str | None = None, r2: float = 2.5) -> dict:
    """Return the spec dict for a preset (a compare spec for example2-compare
    without --system)."""
    if name == "example1-fig1":
        mned = _parse_mned(mned)
        return {
            "problem": {"builtin": "example1",
                        "params": {"m": mned[0], "n": mned[1], "e": mned[2], "d": mned[3]}},
            "system": {
                "kind": "tikhonov_pd", "gamma": 0.25, "delta": 9.0,
                "beta": {"family": "power", "c": 1.0, "r": 0.5},
                "eps": {"family": "power", "c": 3.0, "r": float(r)},
            },
            "horizon": {"t0": 1.0, "T": float(T) if T is not None else 100.0},
            "initial": {"x": [1.0, 1.0, 1.0], "y": [1.0], "lam": [1.0],
                        "vx": [1.0, 1.0, 1.0], "vy": [1.0]},
        }
    if name == "example1-strong":
        mned = _parse_mned(mned)
        if eps not in ("on", "off"):
            raise SpecError("--eps must be 'on' or 'off'")
        eps_curve = (
            {"family": "power", "c": 15.0, "r": 1.6} if eps == "on" else {"family": "zero"}
        )
        return {
            "problem": {"builtin": "example1",
                        "params": {"m": mned[0], "n": mned[1], "e": mned[2], "d": mned[3]}},
            "system": {
                "kind": "tikhonov_pd", "gamma": 10.0, "delta": 0.5,
                "beta": {"family": "power", "c": 1.0, "r": 0.5},
                "eps": eps_curve,
            },
            "horizon": {"t0": 1.0, "T": float(T) if T is not None else 30.0},
            "initial": {"x": [1.0, 1.0, 1.0], "y": [1.0], "lam": [1.0],
                        "vx": [1.0, 1.0, 1.0], "vy": [1.0]},
        }
    if name == "example2-compare":
        spec = {
            "problem": {"builtin": "example2"},
            "horizon": {"t0": 1.0, "T": float(T) if T is not None else 100.0},
            "initial": {"x": [1.0, 1.0], "y": [1.0, 1.0], "lam": [1.0, 1.0],
                        "vx": [1.0, 1.0], "vy": [1.0, 1.0], "vlam": [1.0, 1.0]},
            "systems": [
                {"name": n, "system": copy.deepcopy(s)} for n, s in _EXAMPLE2_MEMBERS
            ],
        }
        if system is not None:
            from .runspec import resolve_compare_spec, run_spec_for_member

            return run_spec_for_member(resolve_compare_spec(spec), system)
        return spec
    if name == "rate-order":
        r2 = float(r2)
        if not r2 > 1.0:
            raise SpecError("--r2 must exceed 1")
        return {
            "problem": {"builtin": "random_qp", "params": {"seed": 7, "dims": [3, 2, 2]}},
            "system": {
                "kind": "tikhonov_pd", "gamma": 10.0, "delta": 0.5,
                "beta": {"family": "power", "c": 1.0, "r": 2.0},
                "eps": {"family": "power", "c": 3.0, "r": r2},
            },
            "horizon": {"t0": 1.0, "T": float(T) if T is not None else 100.0},
        }
    raise SpecError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")


def _parse_mned(mned):
    if isinstance(mned, str):
        parts = [p for p in mned.split(",") if p.strip()]
        if len(parts) != 4:
            raise SpecError("--mned expects four comma-separated numbers m,n,e,d")
        mned = tuple(float(p) for p in parts)
    mned = tuple(float(v) for v in mned)
    if len(mned) != 4:
        raise SpecError("mned must have four entries")
    return mned
