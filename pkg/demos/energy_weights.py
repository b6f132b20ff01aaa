"""What the footprint energy weights alpha and beta price.

The labeling energy has three parts. o1 is the boundary prior: alpha per
metre of sweep edge left inside a footprint, beta per metre of boundary
drawn along a non-sweep edge (a continuation of a sweep line). o2 charges
every unused edge its length times the height step across it. o7 penalises
selected edge pairs that are nearly parallel and close together.

On the terrace the chosen split uses every sweep edge and nothing else,
so its energy is zero. The table prices the alternative of one merged
footprint: alpha times the party wall's length in o1, and its height step
in o2. Merging always costs at least the o2 term, so the split survives
every weighting.

    python demos/energy_weights.py
"""

from massfit import PRESETS, PipelineConfig, evaluate_energy, run_pipeline, segmentation_iou, synth_generate

truth = synth_generate(PRESETS["terrace"](), seed=0)
print(f"the true terrace has {len(truth.footprints)} footprints\n")
print(" alpha   beta  footprints   IoU   chosen   merged (o1 + o2 + o7)")
for alpha, beta in ((0.5, 90.0), (10.0, 90.0), (40.0, 60.0), (90.0, 10.0), (500.0, 0.5)):
    cfg = PipelineConfig(alpha=alpha, beta=beta)
    r = run_pipeline(truth.mesh, truth.gis, cfg)
    chosen = evaluate_energy(r.arrangement, r.solution.labeling, cfg.energy())
    merged = evaluate_energy(r.arrangement, {pid: 1 for pid in r.solution.labeling}, cfg.energy())
    iou = segmentation_iou(r.footprints, truth.footprints).mean_iou
    terms = f"{merged.o1:.1f} + {merged.o2:.1f} + {merged.o7:.1f}"
    print(f"{alpha:6.1f} {beta:6.1f} {len(r.footprints):6d}      {iou:.3f} {chosen.total:7.1f}   {merged.total:8.1f} ({terms})")
