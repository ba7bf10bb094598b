"""Scratch experiment: desk-scale training then full-sampling eval (paired vs shuffled)."""
import logging, time, sys
logging.basicConfig(level=logging.INFO, format="%(message)s")
import numpy as np
from nulldiff.model import ModelConfig, ModelState
from nulldiff.synth import SynthConfig, generate_session, window_session
from nulldiff.trainer import TrainConfig, train, shuffled_pairing
from nulldiff.sampler import SamplerConfig
from nulldiff.metrics import evaluate_translation

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 40
lr = float(sys.argv[2]) if len(sys.argv) > 2 else 1e-3
session_s = float(sys.argv[3]) if len(sys.argv) > 3 else 600.0

cfg = SynthConfig(session_seconds=session_s, seed=7)
sess = generate_session(cfg)
wins = window_session(sess, 5, 5)
test = [w for w in wins if w.split_tag == "test"]
print("train/test:", sum(w.split_tag=='train' for w in wins), len(test))
mc = ModelConfig(n_vertices=cfg.n_vertices, frames_per_window=5, eeg_channels=cfg.n_channels,
                 eeg_window_samples=cfg.window_samples, latent_dim=64)

t0 = time.time()
model = ModelState.init(mc, seed=0)
model, rep = train(model, wins, TrainConfig(epochs=epochs, batch_size=32, learning_rate=lr, seed=0))
print(f"paired training: {time.time()-t0:.0f}s")

reports = evaluate_translation(model, test, SamplerConfig(steps=50, eta=0.0, seed=100), max_windows=12)
rall = [r for r in reports if r.region == "all"][0]
print(f"PAIRED  full-sampling: mse={rall.mse:.4f} r={rall.pearson:.4f} cos={rall.cosine:.4f}")

t0 = time.time()
ctrl = ModelState.init(mc, seed=0)
ctrl, _ = train(ctrl, shuffled_pairing(wins, seed=5), TrainConfig(epochs=epochs, batch_size=32, learning_rate=lr, seed=0))
print(f"shuffled training: {time.time()-t0:.0f}s")
reports = evaluate_translation(ctrl, test, SamplerConfig(steps=50, eta=0.0, seed=100), max_windows=12)
rctl = [r for r in reports if r.region == "all"][0]
print(f"SHUFFLED full-sampling: mse={rctl.mse:.4f} r={rctl.pearson:.4f} cos={rctl.cosine:.4f}")
print(f"margin: {rall.pearson - rctl.pearson:.4f}")
