"""Predicate semantics: the plain big-step meaning of a closed expression.

Generator annotations are interpreted transparently here: ``!e`` and
``e <- (w1, w2)`` evaluate to whatever e evaluates to (instantiation still
insists its weights are positive), and ``e1 ;' e2`` evaluates both sides
but returns the first.  This evaluator is the ground truth the generators
are checked against: a produced valuation is correct iff substituting it
into the query makes this evaluator return True.
"""

from __future__ import annotations

from .core import (
    After,
    App,
    Arith,
    Bang,
    CasePair,
    CaseSum,
    Cmp,
    Expr,
    Fold,
    Inl,
    Inr,
    Inst,
    IntLit,
    MatchFail,
    Pair,
    Rec,
    Unfold,
    Unit,
    Unknown,
    Var,
    subst,
)

DEFAULT_FUEL = 1_000_000


class EvalFailure(Exception):
    """No evaluation rule applies (failed match, bad weight, division by 0)."""


class EvalTimeout(Exception):
    """The fuel budget ran out; distinct from failure."""


class _Fuel:
    __slots__ = ("left",)

    def __init__(self, amount: int) -> None:
        self.left = amount

    def tick(self) -> None:
        self.left -= 1
        if self.left < 0:
            raise EvalTimeout()


def pred_eval(e: Expr, fuel: int = DEFAULT_FUEL) -> Expr:
    """Evaluate a closed expression to a value.

    Raises EvalFailure if the expression is stuck (this includes implicit
    failing match arms) and EvalTimeout if fuel runs out.  Python stack
    exhaustion counts as running out of fuel, not as failure.
    """
    import sys

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 50_000))
    try:
        return _eval(e, _Fuel(fuel))
    except RecursionError:
        raise EvalTimeout() from None
    finally:
        sys.setrecursionlimit(old)


def _eval(e: Expr, fuel: _Fuel) -> Expr:
    fuel.tick()
    if isinstance(e, (Unit, IntLit, Rec)):
        return e
    if isinstance(e, Var):
        raise EvalFailure(f"unbound variable {e.name}")
    if isinstance(e, Unknown):
        raise EvalFailure(f"unknown ?{e.uid} in a closed evaluation")
    if isinstance(e, MatchFail):
        raise EvalFailure("inexhaustive match")
    if isinstance(e, Pair):
        return Pair(_eval(e.fst, fuel), _eval(e.snd, fuel))
    if isinstance(e, Inl):
        return Inl(_eval(e.arg, fuel), e.ty)
    if isinstance(e, Inr):
        return Inr(_eval(e.arg, fuel), e.ty)
    if isinstance(e, Fold):
        return Fold(_eval(e.arg, fuel), e.ty)
    if isinstance(e, Unfold):
        v = _eval(e.arg, fuel)
        if not isinstance(v, Fold):
            raise EvalFailure(f"unfold of non-fold value {v}")
        return v.arg
    if isinstance(e, CasePair):
        v = _eval(e.scrut, fuel)
        if not isinstance(v, Pair):
            raise EvalFailure(f"pair case over non-pair value {v}")
        body = subst(subst(e.body, e.fst_name, v.fst), e.snd_name, v.snd)
        return _eval(body, fuel)
    if isinstance(e, CaseSum):
        v = _eval(e.scrut, fuel)
        if isinstance(v, Inl):
            return _eval(subst(e.left_body, e.left_name, v.arg), fuel)
        if isinstance(v, Inr):
            return _eval(subst(e.right_body, e.right_name, v.arg), fuel)
        raise EvalFailure(f"sum case over non-injection value {v}")
    if isinstance(e, App):
        f = _eval(e.fun, fuel)
        if not isinstance(f, Rec):
            raise EvalFailure(f"application of non-function {f}")
        a = _eval(e.arg, fuel)
        body = subst(subst(f.body, f.fun_name, f), f.arg_name, a)
        return _eval(body, fuel)
    if isinstance(e, Inst):
        wl = _eval(e.w_left, fuel)
        wr = _eval(e.w_right, fuel)
        for w in (wl, wr):
            if not isinstance(w, IntLit) or w.value <= 0:
                raise EvalFailure(f"non-positive instantiation weight {w}")
        return _eval(e.arg, fuel)
    if isinstance(e, Bang):
        return _eval(e.arg, fuel)
    if isinstance(e, After):
        v = _eval(e.main, fuel)
        _eval(e.hook, fuel)
        return v
    if isinstance(e, Cmp):
        l = _eval(e.lhs, fuel)
        r = _eval(e.rhs, fuel)
        if not isinstance(l, IntLit) or not isinstance(r, IntLit):
            raise EvalFailure("comparison of non-integers")
        return _bool_value(_compare(e.op, l.value, r.value))
    if isinstance(e, Arith):
        l = _eval(e.lhs, fuel)
        r = _eval(e.rhs, fuel)
        if not isinstance(l, IntLit) or not isinstance(r, IntLit):
            raise EvalFailure("arithmetic on non-integers")
        return IntLit(_arith(e.op, l.value, r.value))
    raise EvalFailure(f"no rule for {e!r}")


def _compare(op: str, a: int, b: int) -> bool:
    if op == "==":
        return a == b
    if op == "/=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise EvalFailure(f"bad comparison operator {op}")


def _arith(op: str, a: int, b: int) -> int:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise EvalFailure("division by zero")
        return a // b
    raise EvalFailure(f"bad arithmetic operator {op}")


def _bool_value(b: bool) -> Expr:
    from .core import FALSE, TRUE

    return TRUE if b else FALSE
