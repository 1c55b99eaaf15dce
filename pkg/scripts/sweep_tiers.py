import sys, itertools
sys.path.insert(0, '.')
from masterysim.domain import AfmParams
from eval_harness import evaluate

def tiered_afm(n, bc, bm, br, gc, gm, gr, sd, n_c=3, n_r=3):
    n_m = n - n_c - n_r
    betas = tuple([bc]*n_c + [bm]*n_m + [br]*n_r)
    gammas = tuple([gc]*n_c + [gm]*n_m + [gr]*n_r)
    return AfmParams(intercept=0.0, difficulty=betas, learn_slope=gammas,
                     ability_mean=0.0, ability_sd=sd)

best = []
for bm, gm, br, gr, sd, rep in itertools.product(
        (0.3, -0.2), (0.08, 0.15), (-1.0, -1.5), (0.35, 0.5), (1.2, 1.5), (2.5, 3.0)):
    afm = tiered_afm(10, 1.0, bm, br, 0.3, gm, gr, sd)
    label = f"bm{bm},gm{gm},br{br},gr{gr},sd{sd},rep{rep}"
    ok, _ = evaluate('equation', afm=afm, decay=0.45, repeats=rep, clusters=1,
                     label=label, n_learners=70)
    best.append((sum(ok.values()), label))
best.sort(reverse=True)
print("TOP:", best[:5])
