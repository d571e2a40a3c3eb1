"""MRSE surface over the gamma grid and 13 ridge values."""
from _common import parser, save
from ksexplain.experiments import ExperimentConfig, run_sweep

p = parser(__doc__)
p.add_argument("--model", choices=("cox", "rsf"), default="cox")
args = p.parse_args()
for seed in range(args.seeds):
    r = run_sweep(ExperimentConfig(kind=f"synthetic-{args.model}", seed=seed, n_jobs=args.n_jobs))
    save(r, args.out, f"sweep-{args.model}")
    best = min(r.surface, key=lambda c: c["mrse"])
    print(f"seed {seed}: best gamma={best['gamma']} lambda={best['lambda']:.4g} MRSE={best['mrse']:.4f}")
