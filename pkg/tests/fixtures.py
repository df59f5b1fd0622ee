"""Transition matrices as displayed for the six example scenarios (nodes renumbered from 0)."""

from __future__ import annotations

from maxplus_lyapunov.expr import ONE, ZERO, ExprMatrix, tau as t

O = ZERO


def open_tandem_3():
    return ExprMatrix([
        [t(0), O, O],
        [t(0) * t(1), t(1), O],
        [t(0) * t(1) * t(2), t(1) * t(2), t(2)],
    ])


def closed_tandem(n):
    rows = []
    for i in range(n):
        row = [O] * n
        row[i] = t(i)
        row[(i - 1) % n] = t(i)
        rows.append(row)
    return ExprMatrix(rows)


def manufacturing_3():
    return ExprMatrix([
        [t(0), O, O],
        [t(0) * t(1), t(1), ONE],
        [t(0) * t(1) * t(2), t(1) * t(2), t(2)],
    ])


def communication_3():
    return ExprMatrix([
        [t(0), t(0), O],
        [t(0) * t(1), t(0) * t(1), t(1)],
        [t(0) * t(1) * t(2), t(0) * t(1) * t(2), t(1) * t(2)],
    ])


def fork_join_5():
    return ExprMatrix([
        [t(0), O, O, O, O],
        [t(0) * t(1), t(1) * t(2), t(1) * t(2), O, O],
        [O, t(2), t(2), O, O],
        [t(0) * t(1) * t(3), t(1) * t(2) * t(3), t(1) * t(2) * t(3), t(3), O],
        [O, O, t(4), t(4), t(4)],
    ])


def round_robin_2():
    return ExprMatrix([
        [t(0), O, t(0) * t(2), t(0) * t(2)],
        [O, t(1), t(1) * t(2) * t(3), t(1) * t(2) * t(3)],
        [O, O, t(2), t(2)],
        [O, O, t(2) * t(3), t(2) * t(3)],
    ])


SCENARIOS = {
    "open_tandem": open_tandem_3,
    "closed_tandem": lambda: closed_tandem(2),
    "manufacturing_tandem": manufacturing_3,
    "communication_tandem": communication_3,
    "fork_join_5": fork_join_5,
    "round_robin": round_robin_2,
}
