"""End-to-end smoke: compile bst query, generate, re-check with pred_eval."""
import sys

sys.path.insert(0, "src")

from luck.constraints import ConstraintSet
from luck.core import TRUE, Unknown, subst
from luck.desugar import Program
from luck.matching import match_eval
from luck.narrow import GenFailure, sample_value
from luck.predsem import pred_eval
from luck.trace import RandomSource, RunCtx

src = open("corpus/bst.luck").read()
prog = Program.from_source(src)
q = prog.compile_query("bst 3 0 10 t = True")
print("unknowns:", {n: str(t) for n, t in q.unknowns.items()})

ok = 0
fail = 0
mismatch = 0
for seed in range(200):
    cs = ConstraintSet(int_bounds=(0, 10))
    target = q.target
    uids = {}
    for name, ty in q.unknowns.items():
        cs, (uid,) = cs.fresh([ty])
        uids[name] = uid
        target = subst(target, name, Unknown(uid))
    ctx = RunCtx(RandomSource(seed))
    try:
        out = match_eval(target, TRUE, cs, ctx)
    except GenFailure:
        fail += 1
        continue
    if out is None or out.failed:
        fail += 1
        continue
    vals = {}
    for name, uid in uids.items():
        v, out = sample_value(Unknown(uid), out, ctx)
        vals[name] = v
    concrete = q.target
    for name, v in vals.items():
        concrete = subst(concrete, name, v)
    if pred_eval(concrete) == TRUE:
        ok += 1
        if ok <= 3:
            print("sample:", {n: str(v) for n, v in vals.items()})
    else:
        mismatch += 1
        print("MISMATCH at seed", seed, {n: str(v) for n, v in vals.items()})

print(f"ok={ok} fail={fail} mismatch={mismatch}")
