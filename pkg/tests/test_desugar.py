"""Surface-to-core lowering: types, cascades, equality, monomorphization."""

from pathlib import Path

import pytest

from luck.core import (
    FALSE,
    TRUE,
    Arith,
    CaseSum,
    Expr,
    Inst,
    IntLit,
    TInt,
    TMu,
    TProd,
    TSum,
    TUnit,
    TVar,
)
from luck.desugar import LuckTypeError, Program
from luck.predsem import pred_eval
from luck.surface import LuckSyntaxError

CORPUS = Path(__file__).parent.parent / "corpus"


def load(name):
    return Program.from_source((CORPUS / name).read_text())


def nodes(e, klass):
    """All nodes of a class in an expression, preorder."""
    out = []

    def go(x):
        if isinstance(x, klass):
            out.append(x)
        for f in getattr(x, "__dataclass_fields__", {}):
            v = getattr(x, f)
            if isinstance(v, Expr):
                go(v)

    go(e)
    return out


def ground(prog, query):
    q = prog.compile_query(query)
    assert not q.unknowns, "query was supposed to be ground"
    return pred_eval(q.target)


# -- datatype lowering ---------------------------------------------------------


@pytest.mark.parametrize("name", sorted(p.name for p in
                                        CORPUS.glob("*.luck")))
def test_corpus_programs_lower(name):
    load(name)  # loading type-checks and lowers every declared function


def test_recursive_datatype_lowers_to_a_mu_type():
    q = load("bst.luck").compile_query("bst 3 0 10 t = True")
    x = TVar("Tree Int")
    assert q.unknowns == {"t": TMu("Tree Int",
                                   TSum(TUnit(),
                                        TProd(TInt(), TProd(x, x))))}
    assert q.expect_true is True


def test_non_recursive_datatype_lowers_to_a_plain_sum():
    prog = Program.from_source("""
data Opt a = None | Some a
sig f :: Opt Int -> Bool
fun f m = case m of | Some x -> 0 < x | None -> False end
""")
    q = prog.compile_query("f u = True")
    assert q.unknowns == {"u": TSum(TUnit(), TInt())}


# -- case cascades -------------------------------------------------------------


def test_three_arm_weights_become_a_stick_breaking_cascade():
    prog = Program.from_source("""
data T = A | B | C
sig f :: T -> Bool
fun f t = case t of | 1 % A -> True | 2 % B -> True | 3 % C -> False end
""")
    insts = nodes(prog.closed_core("f"), Inst)
    pairs = [(i.w_left.value, i.w_right.value) for i in insts
             if isinstance(i.w_left, IntLit) and isinstance(i.w_right,
                                                            IntLit)]
    assert pairs == [(1, 5), (2, 3)]


def test_bool_case_uses_weighted_dispatch():
    prog = Program.from_source("""
sig f :: Bool -> Bool
fun f b = case b of | 3 % True -> True | 1 % False -> False end
""")
    (inst,) = nodes(prog.closed_core("f"), Inst)
    assert (inst.w_left.value, inst.w_right.value) == (3, 1)


def test_connectives_and_if_stay_unweighted():
    prog = Program.from_source("""
sig f :: Bool -> Bool -> Bool
fun f a b = if a && b then not a else a || b
""")
    core = prog.closed_core("f")
    assert nodes(core, Inst) == []
    assert nodes(core, CaseSum) != []


def test_single_constructor_datatype_destructures_without_choice():
    prog = Program.from_source("""
data Box a = Box a
sig f :: Box Int -> Bool
fun f b = case b of | Box x -> 0 < x end
""")
    assert nodes(prog.closed_core("f"), Inst) == []
    assert ground(prog, "f (Box 3) = True") == TRUE
    assert ground(prog, "f (Box 0) = True") == FALSE


def test_non_variable_scrutinee_is_evaluated_once():
    prog = Program.from_source("""
sig f :: Int -> Bool
fun f n = case n + 1 of | m -> 0 < m && m < 5 end
""")
    assert len(nodes(prog.closed_core("f"), Arith)) == 1
    assert ground(prog, "f 3 = True") == TRUE
    assert ground(prog, "f 5 = True") == FALSE


# -- ground evaluation agrees with the source reading ------------------------


@pytest.mark.parametrize("source,query,want", [
    ("member.luck", "member 2 [1, 2, 3] = True", TRUE),
    ("member.luck", "member 5 [1, 2, 3] = True", FALSE),
    ("member.luck", "member 5 [] = True", FALSE),
    ("sorted.luck", "sorted [1, 2, 3] = True", TRUE),
    ("sorted.luck", "sorted [2, 2] = True", FALSE),
    ("sorted.luck", "sorted [] = True", TRUE),
    ("length.luck", "length [4, 5, 6] 3 = True", TRUE),
    ("length.luck", "length [] 1 = True", FALSE),
    ("distinct.luck", "distinct [1, 2, 3] = True", TRUE),
    ("distinct.luck", "distinct [1, 2, 1] = True", FALSE),
    ("redex.luck", "isRedex (App (Lam 1 (Var 1)) (Var 2)) = True", TRUE),
    ("redex.luck", "isRedex (Var 1) = True", FALSE),
    ("redex.luck", "isRedex (App (Var 1) (Var 2)) = True", FALSE),
    ("ex35.luck", "a 2 = True", TRUE),
    ("ex35.luck", "a 0 = True", FALSE),
    ("ex35.luck", "a 4 = True", FALSE),
    ("ex35.luck", "b 3 = True", TRUE),
    ("ex35.luck", "b 5 = True", FALSE),
    ("bst.luck", "bst 3 0 10 (Node 5 Empty Empty) = True", TRUE),
    ("bst.luck", "bst 3 0 10 Empty = True", TRUE),
    ("bst.luck", "bst 2 0 10 (Node 5 (Node 7 Empty Empty) Empty) = True",
     FALSE),
    ("bst.luck", "bst 0 0 10 (Node 5 Empty Empty) = True", FALSE),
    ("rbt.luck", "isRBT 0 0 5 Red Leaf = True", TRUE),
    ("rbt.luck", "isRBT 1 0 9 Red (Node Black 4 Leaf Leaf) = True", TRUE),
    ("rbt.luck", "isRBT 1 0 9 Red (Node Red 4 Leaf Leaf) = True", FALSE),
    ("rbt.luck",
     "isRBT 1 0 9 Black (Node Red 4 Leaf (Node Black 7 Leaf Leaf)) = True",
     FALSE),
])
def test_ground_queries(source, query, want):
    assert ground(load(source), query) == want


# -- structural equality -------------------------------------------------------


def test_equality_on_datatypes_needs_one_closed_side():
    prog = Program.from_source("""
data P = MkP Int Bool
sig f :: P -> Bool
fun f p = p == MkP 3 True
""")
    assert ground(prog, "f (MkP 3 True) = True") == TRUE
    assert ground(prog, "f (MkP 3 False) = True") == FALSE
    assert ground(prog, "f (MkP 2 True) = True") == FALSE


def test_inequality_and_bool_equality():
    prog = Program.from_source("""
sig f :: Int -> Bool
fun f x = x /= 3
sig g :: Bool -> Bool
fun g b = b == False
""")
    assert ground(prog, "f 4 = True") == TRUE
    assert ground(prog, "f 3 = True") == FALSE
    assert ground(prog, "g False = True") == TRUE
    assert ground(prog, "g True = True") == FALSE


def test_equality_between_two_open_terms_is_rejected():
    with pytest.raises(LuckTypeError, match="constructor term"):
        Program.from_source("""
sig k :: [Int] -> [Int] -> Bool
fun k a b = a == b
""")


# -- monomorphization ----------------------------------------------------------


def test_polymorphic_functions_specialize_per_instantiation():
    prog = Program.from_source("""
sig second :: a -> b -> b
fun second x y = y
sig f :: Int -> Bool
fun f n = second n (second True (0 < n))
""")
    assert ground(prog, "f 3 = True") == TRUE
    assert ground(prog, "f 0 = True") == FALSE
    assert {"second@Int,Bool", "second@Bool,Bool"} <= set(prog.cores)


def test_mutual_recursion_is_rejected():
    # declaration-order scoping makes a cycle impossible to even write:
    # one of the two bodies must mention a function declared below it
    with pytest.raises(LuckSyntaxError, match="before its declaration"):
        Program.from_source("""
sig isEven :: Int -> Bool
fun isEven n = if n == 0 then True else isOdd (n - 1)
sig isOdd :: Int -> Bool
fun isOdd n = if n == 0 then False else isEven (n - 1)
""")


def test_polymorphic_recursion_is_rejected():
    with pytest.raises(LuckTypeError, match="polymorphic recursion"):
        Program.from_source("""
sig nest :: a -> Bool
fun nest x = nest (x, x)
""")


# -- declaration errors --------------------------------------------------------


def test_reserved_type_names_are_rejected():
    with pytest.raises(LuckTypeError, match="type name Int is reserved"):
        Program.from_source("data Int = MkInt\nsig f :: Int -> Int\n"
                            "fun f x = x")


def test_sig_is_required():
    with pytest.raises(LuckTypeError, match="needs a sig"):
        Program.from_source("fun f x = x")


def test_recursion_through_a_container_is_rejected():
    with pytest.raises(LuckTypeError, match="recursive through another"):
        Program.from_source("""
data Rose = MkRose [Rose]
sig f :: Rose -> Bool
fun f r = True
""")


def test_mutually_recursive_datatypes_are_rejected():
    with pytest.raises(LuckTypeError, match="recursive through another"):
        Program.from_source("""
data A = MkA B | EndA
data B = MkB A
sig f :: A -> Bool
fun f a = True
""")


# -- query typing --------------------------------------------------------------


def test_query_unknowns_get_their_inferred_core_types():
    q = load("member.luck").compile_query("member x [0, 1] = True")
    assert q.unknowns == {"x": TInt()}
    assert q.expect_true is True


def test_function_typed_unknowns_are_rejected():
    prog = Program.from_source("sig f :: Int -> Bool\nfun f x = 0 < x")
    with pytest.raises(LuckTypeError, match="cannot be generated"):
        prog.compile_query("u 3 = True")
