"""Parse algebra, print it back, and test equivalence with the random oracle."""

from algsteps.expr import equiv_check, linearize, parse, print_expr

# parse builds a binary tree; print_expr emits minimal parentheses
tree = parse("m(k-n)=gs")
print("input     m(k-n)=gs")
print("printed  ", print_expr(tree))          # implicit products become explicit
print("root     ", tree.op)                   # '=' at the root
print("round trip ok:", parse(print_expr(tree)) == tree)

# the DFS linearization feeds the tree encoder: (symbol, root path) pairs
print("\ntokens of x+5=9")
for tok in linearize(parse("x+5=9")):
    print(f"  {tok.symbol:>2}  path={tok.path}")

# the oracle evaluates both sides at random rational points
pairs = [
    ("3x+2x", "5x"),        # combining like terms preserves value
    ("x*x", "x^2"),         # so does rewriting a product as a power
    ("(x+1)x", "x*x+x"),    # and distributing
    ("3x+2x", "6x"),        # a miscombined step does not
]
print("\nequivalence oracle")
for a, b in pairs:
    verdict = equiv_check(parse(a), parse(b))
    print(f"  {a:>8} == {b:<8} -> {verdict}")
