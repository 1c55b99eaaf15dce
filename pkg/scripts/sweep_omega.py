import sys, itertools
sys.path.insert(0, '.')
from masterysim.domain import AfmParams
from eval_harness import evaluate

def omega_afm(n, n_c, n_r, bc, bm, br, gc, gm, gr, sd):
    n_m = n - n_c - n_r
    betas = tuple([bc]*n_c + [bm]*n_m + [br]*n_r)
    gammas = tuple([gc]*n_c + [gm]*n_m + [gr]*n_r)
    return AfmParams(intercept=0.0, difficulty=betas, learn_slope=gammas,
                     ability_mean=0.0, ability_sd=sd)

def omega_weights(n, n_c, n_r, w_mid, w_rare):
    n_m = n - n_c - n_r
    return tuple([1.0]*n_c + [w_mid]*n_m + [w_rare]*n_r)

results = []
for w_mid, bm, gm, br, sd, rep in itertools.product(
        (0.35, 0.2), (-0.5, -0.9), (0.05, 0.1), (0.5, 0.0), (1.2, 1.6), (3.0,)):
    n, n_c, n_r = 10, 3, 2
    afm = omega_afm(n, n_c, n_r, 2.2, bm, br, 0.1, gm, 0.3, sd)
    w = omega_weights(n, n_c, n_r, w_mid, 0.008)
    label = f"wm{w_mid},bm{bm},gm{gm},br{br},sd{sd}"
    ok, _ = evaluate('equation', afm=afm, weights=w, repeats=rep, clusters=1,
                     label=label, n_learners=70)
    results.append((sum(ok.values()), label))
results.sort(reverse=True)
print("TOP:", results[:6])
