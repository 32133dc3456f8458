"""Shared run builders for the bound and acceptance tests."""

from omdkit.harness import ExperimentConfig, run_experiment


def gen_config(learner, params, spec, comparators=("zero",), audit=True):
    return ExperimentConfig(
        learner, params, {"kind": "generator", "spec": spec},
        list(comparators), audit=audit)


def separable(seed, gamma=0.3, d=10, T=200):
    return {"kind": "separable_margin", "seed": seed,
            "params": {"gamma": gamma, "d": d, "T": T}}


def noisy_linear(seed, sigma=0.2, d=10, T=200):
    return {"kind": "noisy_linear", "seed": seed,
            "params": {"sigma": sigma, "d": d, "T": T}}


def sparse_target(seed, k=3, d=10, T=200):
    return {"kind": "sparse_target", "seed": seed,
            "params": {"k": k, "d": d, "T": T}}


def heavy_tail(seed, zipf=1.5, d=12, T=200):
    return {"kind": "heavy_tail_features", "seed": seed,
            "params": {"zipf": zipf, "d": d, "T": T}}


def run(learner, params, spec, comparators=("zero",), audit=True):
    return run_experiment(gen_config(learner, params, spec, comparators, audit))


def regularizer_families(dim=2):
    """One representative instance per regularizer family, at a nontrivial state."""
    import numpy as np

    from omdkit.regularizers import (
        CompositeQuadL1,
        FixedQuadratic,
        GrowingQuadratic,
        LinearScheduled,
        MaxScaled,
        PNorm,
        ScaleInvDiag,
        ScaleInvPNorm,
        SqrtScheduled,
        WeightedQNorm,
    )

    fams = {}
    fams["fixed_quadratic"] = FixedQuadratic(dim, scale=1.5)
    fams["pnorm"] = PNorm(dim, p=1.5)
    fams["weighted_qnorm"] = WeightedQNorm(dim, q=1.5, weights=np.linspace(0.5, 2.0, dim))

    gq = GrowingQuadratic(dim, r=1.0)
    gq.update(np.linspace(1.0, 0.4, dim))
    gq.update(np.linspace(-0.3, 0.8, dim))
    fams["growing_quadratic"] = gq

    gqd = GrowingQuadratic(dim, r=2.0, diagonal=True)
    gqd.update(np.linspace(1.0, 0.4, dim))
    gqd.update(np.linspace(-0.3, 0.8, dim))
    fams["growing_quadratic_diag"] = gqd

    comp = CompositeQuadL1(dim, eta=0.5, lam=0.3, schedule="sqrt")
    for _ in range(4):
        comp.advance_step()
    fams["composite_sqrt"] = comp

    compl = CompositeQuadL1(dim, eta=1.0, lam=0.2, ridge=1.0, schedule="linear")
    for _ in range(4):
        compl.advance_step()
    fams["composite_linear"] = compl

    sq = SqrtScheduled(PNorm(dim, p=1.8))
    for _ in range(3):
        sq.advance_step()
    fams["sqrt_scheduled"] = sq

    ln = LinearScheduled(FixedQuadratic(dim, scale=0.7))
    for _ in range(3):
        ln.advance_step()
    fams["linear_scheduled"] = ln

    ms = MaxScaled(FixedQuadratic(dim))
    ms.observe_input(np.full(dim, 0.9))
    ms.observe_input(np.linspace(0.2, 1.4, dim))
    fams["max_scaled"] = ms

    sip = ScaleInvPNorm(dim, lipschitz=1.0)
    sip.observe_input(np.linspace(0.5, 1.5, dim))
    sip.observe_gradient(np.linspace(0.3, -0.4, dim))
    sip.observe_input(np.linspace(1.2, 0.8, dim))
    fams["scaleinv_pnorm"] = sip

    sid = ScaleInvDiag(dim, lipschitz=1.0)
    sid.observe_input(np.linspace(0.5, 1.5, dim))
    sid.observe_gradient(np.linspace(0.3, -0.4, dim))
    sid.observe_input(np.linspace(1.2, 0.8, dim))
    fams["scaleinv_diag"] = sid
    return fams


# the nine audited learner configurations, keyed by display name
def audited_learner_suite(d, T, seed):
    sep = separable(seed, d=d, T=T)
    lin = noisy_linear(seed, d=d, T=T)
    return [
        ("ogd", {"eta": 0.5, "loss": "hinge"}, sep),
        ("pnorm_perceptron", {"p": 1.5}, sep),
        ("pa", {}, sep),
        ("second_order", {"r": 1.0, "variant": "full", "trigger": "omd"}, sep),
        ("second_order", {"r": 1.0, "variant": "diagonal", "trigger": "omd"}, sep),
        ("vaw", {"a": 1.0}, lin),
        ("adaptive_filter", {}, lin),
        ("scaleinv_pnorm", {"lipschitz": 1.0, "eta": 1.0, "loss": "absolute"}, lin),
        ("scaleinv_diag", {"lipschitz": 1.0, "eta": 1.0, "loss": "absolute"}, lin),
    ]
