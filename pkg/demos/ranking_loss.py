# Value-weighted LambdaRank on one request, and a gradient check.
import numpy as np

from hitmatch.rank_loss import (
    LossConfig,
    RankedRequest,
    finite_difference_grad,
    grad_relative_error,
    lambdarank_loss,
    ndcg,
)

rng = np.random.default_rng(4)
d = 8
req = RankedRequest(
    ad_ids=np.arange(d),
    scores=rng.permutation(d) * 0.5,
    true_rank=rng.permutation(d) + 1,
    values=rng.lognormal(0, 1, d).round(3),
)
print("true ranks:", req.true_rank)
print("values    :", req.values)
print("model order (item ids):", req.model_order())
print(f"NDCG of the model order: {ndcg(req):.4f}")

for cfg in [LossConfig(use_value=False), LossConfig("multiply"), LossConfig("add")]:
    loss, grad = lambdarank_loss(req, cfg)
    err = grad_relative_error(grad, finite_difference_grad(req, cfg))
    label = "no value" if not cfg.use_value else cfg.combine_op
    print(f"{label:9s} loss {loss:9.4f}   gradient vs finite differences {err:.1e}")

# a step along the negative gradient should lower the loss
cfg = LossConfig()
loss, grad = lambdarank_loss(req, cfg)
after, _ = lambdarank_loss(req.with_scores(req.scores - 0.01 * grad), cfg)
print(f"one small step: {loss:.4f} -> {after:.4f}")
