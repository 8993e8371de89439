"""Pattern-directed matching evaluation.

Where narrowing runs an expression forward and only afterwards compares
the result with the wanted value, matching pushes the wanted pattern
backwards through the expression.  Case branches whose bodies cannot
produce the pattern are pruned before any random commitment is made, so
far less generation effort is wasted on doomed attempts.

match_eval returns either a refined constraint set (the pattern can still
be realized; None means the match is semantically impossible down this
path).  A None outcome still carries meaning: its accumulated probability
is the weight of this failing derivation.  Hard errors (empty sample
spaces, bad weights) raise GenFailure instead and abort the attempt.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Optional

from .constraints import ConstraintSet, ContractViolation
from .constraints import rename as rename_unknowns
from .constraints import union as union_sets
from .core import (
    FALSE,
    TRUE,
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
    TSum,
    Type,
    Unfold,
    Unit,
    Unknown,
    Var,
    subst,
    typecheck,
    unfold_mu,
)
from .intdomain import negate_op
from .narrow import GenFailure, narrow, narrow_weight, sample_value
from .trace import RunCtx

MatchResult = Optional[ConstraintSet]


def expr_type(e: Expr, cs: ConstraintSet) -> Type:
    """The type of a closed expression over the store's unknowns."""
    return typecheck(e, None, cs.utypes)


def heads_clash(body: Expr, p: Expr) -> bool:
    """Whether a branch body can be ruled out against a pattern statically.

    True only when both sides are built from constructors that disagree,
    so no store could ever reconcile them; anything that still needs
    evaluation or unification reports False.
    """
    if isinstance(body, Inl) and isinstance(p, Inl):
        return heads_clash(body.arg, p.arg)
    if isinstance(body, Inr) and isinstance(p, Inr):
        return heads_clash(body.arg, p.arg)
    if (isinstance(body, (Inl, Inr)) and isinstance(p, (Inl, Inr))
            and type(body) is not type(p)):
        return True
    if isinstance(body, Fold) and isinstance(p, Fold):
        return heads_clash(body.arg, p.arg)
    if isinstance(body, Pair) and isinstance(p, Pair):
        return heads_clash(body.fst, p.fst) or heads_clash(body.snd, p.snd)
    if isinstance(body, IntLit) and isinstance(p, IntLit):
        return body.value != p.value
    return False


def match_eval(e: Expr, p: Expr, cs: ConstraintSet, ctx: RunCtx) -> MatchResult:
    """Evaluate e demanding that its value match the pattern p."""
    ctx.tick()
    if isinstance(e, (Unit, IntLit, Unknown)):
        out = cs.unify(e, p)
        return out if out.sat() else None
    if isinstance(e, Var):
        raise GenFailure(f"unbound variable {e.name}")
    if isinstance(e, MatchFail):
        raise GenFailure("inexhaustive match")
    if isinstance(e, Rec):
        raise ContractViolation("cannot match a function value")
    if isinstance(e, Pair):
        t1 = expr_type(e.fst, cs)
        t2 = expr_type(e.snd, cs)
        cs1, (u1, u2) = cs.fresh([t1, t2])
        cs0 = cs1.unify(Pair(Unknown(u1), Unknown(u2)), p)
        if not cs0.sat():
            return None
        first = match_eval(e.fst, Unknown(u1), cs0, ctx)
        if first is None:
            return None
        return match_eval(e.snd, Unknown(u2), first, ctx)
    if isinstance(e, Inl):
        cs1, (u,) = cs.fresh([e.ty.left])
        cs2 = cs1.unify(Inl(Unknown(u), e.ty), p)
        if not cs2.sat():
            return None
        return match_eval(e.arg, Unknown(u), cs2, ctx)
    if isinstance(e, Inr):
        cs1, (u,) = cs.fresh([e.ty.right])
        cs2 = cs1.unify(Inr(Unknown(u), e.ty), p)
        if not cs2.sat():
            return None
        return match_eval(e.arg, Unknown(u), cs2, ctx)
    if isinstance(e, Fold):
        cs1, (u,) = cs.fresh([unfold_mu(e.ty)])
        cs2 = cs1.unify(Fold(Unknown(u), e.ty), p)
        if not cs2.sat():
            return None
        return match_eval(e.arg, Unknown(u), cs2, ctx)
    if isinstance(e, Unfold):
        mu = expr_type(e.arg, cs)
        return match_eval(e.arg, Fold(p, mu), cs, ctx)
    if isinstance(e, App):
        f, cs = narrow(e.fun, cs, ctx)
        if not isinstance(f, Rec):
            raise GenFailure(f"application of non-function {f}")
        v, cs = narrow(e.arg, cs, ctx)
        body = subst(subst(f.body, f.fun_name, f), f.arg_name, v)
        return match_eval(body, p, cs, ctx)
    if isinstance(e, CasePair):
        ty = expr_type(e.scrut, cs)
        cs0, (u1, u2) = cs.fresh([ty.left, ty.right])
        scrut = match_eval(e.scrut, Pair(Unknown(u1), Unknown(u2)), cs0, ctx)
        if scrut is None:
            return None
        body = subst(subst(e.body, e.fst_name, Unknown(u1)),
                     e.snd_name, Unknown(u2))
        return match_eval(body, p, scrut, ctx)
    if isinstance(e, CaseSum):
        if isinstance(e.scrut, Inst):
            return match_case_narrowed(e, p, cs, ctx)
        return match_case_plain(e, p, cs, ctx)
    if isinstance(e, Inst):
        got = match_eval(e.arg, p, cs, ctx)
        if got is None:
            return None
        n1, got = narrow_weight(e.w_left, got, ctx)
        n2, got = narrow_weight(e.w_right, got, ctx)
        ty = expr_type(e.arg, cs)
        cs0, (u1, u2) = got.fresh([ty.left, ty.right])
        left = cs0.unify(p, Inl(Unknown(u1), ty))
        right = cs0.unify(p, Inr(Unknown(u2), ty))
        return plain_choose(n1, left, n2, right, ctx)
    if isinstance(e, Cmp):
        return match_cmp(e, p, cs, ctx)
    if isinstance(e, Arith):
        v, cs = narrow(e, cs, ctx)
        out = cs.unify(v, p)
        return out if out.sat() else None
    if isinstance(e, After):
        got = match_eval(e.main, p, cs, ctx)
        if got is None:
            return None
        _, out = narrow(e.hook, got, ctx)
        return out
    if isinstance(e, Bang):
        got = match_eval(e.arg, p, cs, ctx)
        if got is None:
            return None
        _, out = sample_value(p, got, ctx)
        return out
    raise ContractViolation(f"cannot match {e!r}")


def match_cmp(e: Cmp, p: Expr, cs: ConstraintSet, ctx: RunCtx) -> MatchResult:
    """A comparison matched against a boolean pattern.

    Rather than flipping a coin for an undetermined comparison (as
    narrowing must), assert the comparison on the side where the pattern
    is True and its negation where the pattern is False, and keep every
    satisfiable side.  No randomness, no failure mass.
    """
    from .intdomain import eval_op

    l, cs = narrow(e.lhs, cs, ctx)
    r, cs = narrow(e.rhs, cs, ctx)
    if isinstance(l, IntLit) and isinstance(r, IntLit):
        res = TRUE if eval_op(e.op, l.value, r.value) else FALSE
        out = cs.unify(res, p)
        return out if out.sat() else None
    lv = l if isinstance(l, Unknown) else l.value
    rv = r if isinstance(r, Unknown) else r.value
    yes = cs.unify(p, TRUE).post_cmp(e.op, lv, rv)
    no = cs.unify(p, FALSE).post_cmp(negate_op(e.op), lv, rv)
    return combine(cs,
                   yes if yes.sat() else None,
                   no if no.sat() else None)


def match_case_plain(e: CaseSum, p: Expr, cs: ConstraintSet,
                     ctx: RunCtx) -> MatchResult:
    """The lookahead case: try the scrutinee against both injections.

    Both attempts start from the same store; if both are viable, both
    branch bodies are evaluated against the pattern and the surviving
    refinements are merged into one store denoting their union.  A side
    whose body is a value that cannot possibly match the pattern (say,
    False against True) has no derivation, so its scrutinee premise is
    never explored.
    """
    ty = expr_type(e.scrut, cs)
    if not isinstance(ty, TSum):
        raise ContractViolation(f"sum case over {ty}")
    cs0, (u1, u2) = cs.fresh([ty.left, ty.right])
    as_inl = None if heads_clash(e.left_body, p) else \
        match_eval(e.scrut, Inl(Unknown(u1), ty), cs0, ctx)
    as_inr = None if heads_clash(e.right_body, p) else \
        match_eval(e.scrut, Inr(Unknown(u2), ty), cs0, ctx)
    if as_inl is None and as_inr is None:
        return None
    if as_inr is None:
        body = subst(e.left_body, e.left_name, Unknown(u1))
        return match_eval(body, p, as_inl, ctx)
    if as_inl is None:
        body = subst(e.right_body, e.right_name, Unknown(u2))
        return match_eval(body, p, as_inr, ctx)
    left = match_eval(subst(e.left_body, e.left_name, Unknown(u1)),
                      p, as_inl, ctx)
    right = match_eval(subst(e.right_body, e.right_name, Unknown(u2)),
                       p, as_inr, ctx)
    return combine(cs0, left, right)


def match_case_narrowed(e: CaseSum, p: Expr, cs: ConstraintSet,
                        ctx: RunCtx) -> MatchResult:
    """Weighted dispatch for a case whose scrutinee carries weights.

    The instantiated scrutinee is narrowed (committing to one branch with
    the weighted coin) and only the chosen branch body is matched.  If
    that body fails and the sibling branch was viable, the sibling is
    retried once in place of a full restart.
    """
    inst = e.scrut
    v, cs = narrow(inst.arg, cs, ctx)
    n1, cs = narrow_weight(inst.w_left, cs, ctx)
    n2, cs = narrow_weight(inst.w_right, cs, ctx)
    if isinstance(v, Inl):
        return match_eval(subst(e.left_body, e.left_name, v.arg), p, cs, ctx)
    if isinstance(v, Inr):
        return match_eval(subst(e.right_body, e.right_name, v.arg), p, cs, ctx)
    if not isinstance(v, Unknown):
        raise GenFailure(f"case dispatch over non-sum value {v}")
    ty = cs.type_of(v.uid)
    if not isinstance(ty, TSum):
        raise ContractViolation(f"sum case over {ty}")
    cs2, (ul, ur) = cs.fresh([ty.left, ty.right])
    left = cs2.unify(v, Inl(Unknown(ul), ty))
    right = cs2.unify(v, Inr(Unknown(ur), ty))

    def run(side: int, branch: ConstraintSet) -> MatchResult:
        if side == 0:
            body = subst(e.left_body, e.left_name, Unknown(ul))
        else:
            body = subst(e.right_body, e.right_name, Unknown(ur))
        return match_eval(body, p, branch, ctx)

    return backtracking_choose(n1, left, n2, right, ctx, run)


def plain_choose(n1: int, left: ConstraintSet, n2: int,
                 right: ConstraintSet, ctx: RunCtx) -> ConstraintSet:
    """Weighted commitment between two refinements, no continuation."""
    ls, rs = left.sat() and n1 > 0, right.sat() and n2 > 0
    if ls and rs:
        side = ctx.pick_weighted(n1, n2)
        ctx.record(side, 2, Fraction(n1 if side == 0 else n2, n1 + n2))
        return left if side == 0 else right
    if ls:
        return left
    if rs:
        return right
    if left.sat() or right.sat():
        raise GenFailure("no weight mass on the satisfiable branches")
    raise GenFailure("both instantiation branches unsatisfiable")


def backtracking_choose(n1: int, left: ConstraintSet, n2: int,
                        right: ConstraintSet, ctx: RunCtx,
                        run: Callable[[int, ConstraintSet], MatchResult],
                        ) -> MatchResult:
    """Weighted commitment whose continuation may locally fail.

    When both sides are viable and the chosen side's continuation comes
    back empty, the sibling is tried once from the rollback point; the
    abandoned choices disappear from the trace but are counted on the
    run context.  Zero-weight sides are never entered.
    """
    ls, rs = left.sat() and n1 > 0, right.sat() and n2 > 0
    if ls and rs:
        side = ctx.pick_weighted(n1, n2)
        if not ctx.local_backtracking:
            ctx.record(side, 2, Fraction(n1 if side == 0 else n2, n1 + n2))
            return run(side, left if side == 0 else right)
        marker = ctx.mark()
        ctx.record(side, 2, Fraction(n1 if side == 0 else n2, n1 + n2))
        try:
            got = run(side, left if side == 0 else right)
        except GenFailure:
            got = None
        if got is not None:
            return got
        ctx.rollback(marker)
        ctx.local_backtracks += 1
        other = 1 - side
        ctx.record(other, 2, Fraction(n1 if other == 0 else n2, n1 + n2))
        return run(other, left if other == 0 else right)
    if ls:
        return run(0, left)
    if rs:
        return run(1, right)
    raise GenFailure("no viable case branch")


def combine(base: ConstraintSet, a: MatchResult, b: MatchResult) -> MatchResult:
    """Merge the outcomes of two branch derivations rooted at base.

    Both derivations mint fresh unknowns from the same counter, so the
    right store's newcomers are renamed out of the way before the union.
    """
    if a is None:
        return b
    if b is None:
        return a
    created = a.created_since(base)
    renamed, _ = rename_unknowns(created, b, floor=a.next_fresh)
    return union_sets(a, renamed)
