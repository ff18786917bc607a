"""
Strong, weak or no U(1) symmetry
================================

Classify three dissipative dimers and check the predicted conservation
pattern against simulation.
"""
import os

from opengauge.opspec import load_model
from opengauge.symmetry import classify, predict, verify_by_simulation

here = os.path.dirname(os.path.abspath(__file__))

for name in ["dephasing", "two_body_loss", "pair_jump"]:
    spec = load_model(os.path.join(here, "..", "models", name + ".lgm"))
    cls = classify(spec)
    print(f"{name:14s} -> {cls.label.value:6s}  |[H,N]| = {cls.norms['H_N']:.1e}"
          f"  |[N-gen, L]| = {cls.norms['superoperator']:.1e}")
    print("   predicted:", predict(cls))
    sim = verify_by_simulation(spec, T=20.0)["simulation"]
    print(f"   simulated: N drift {sim['N_drift']:.2e} ({sim['N_status']}),"
          f" O_N drift {sim['ON_drift']:.2e} ({sim['ON_status']}) -> {sim['verdict']}")

# The pair-jump dimer starts without number coherences here and only builds
# up tiny ones, so its O_N verdict lands in the inconclusive band.
