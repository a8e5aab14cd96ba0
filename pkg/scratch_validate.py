"""Dev scratch: validate core math + end-to-end pipeline before freezing tests."""
import time

import numpy as np

from epib0 import *
from epib0.fourier import fft2, ifft2
from epib0.lifting import filter_image_patterns

rng = np.random.default_rng(0)

# --- 1. adjoint identities -------------------------------------------------
p = AcqParams(n_grid=16, k_seg=2, m_delay=4, dt=1e-3)
sm = build_masks(p)
print("M for 16/2/4:", p.n_frames, "lines:", sm.lines1.sum() + sm.lines2.sum())

x = rng.standard_normal((sm.n_frames, 16, 16)) + 1j * rng.standard_normal((sm.n_frames, 16, 16))
y = rng.standard_normal((sm.n_frames, 16, 16)) + 1j * rng.standard_normal((sm.n_frames, 16, 16))
lhs = np.vdot(y, forward(x, sm))
rhs = np.vdot(adjoint(y, sm), x)
print("adjoint rel err:", abs(lhs - rhs) / abs(lhs))

alpha = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
beta = 0.9 * np.exp(1j * 0.1 * rng.standard_normal((16, 16)))
lhs = np.vdot(y, forward_exp(alpha, beta, sm))
rhs = np.vdot(adjoint_exp(y, beta, sm), alpha)
print("adjoint_exp rel err:", abs(lhs - rhs) / abs(lhs))

# --- 2. exact-model annihilation ------------------------------------------
N, M = 64, 8
spec = FilterSpec(5, 5, delta=1)
yy, xx = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
bl = (0.9 + 0.05 * np.exp(2j * np.pi * (2 * xx + 2 * yy) / N)
      + 0.03 * np.exp(-2j * np.pi * (2 * xx + 1 * yy) / N))
print("max|beta_bl|:", np.abs(bl).max())
amp = 1.0 + 0.5 * np.cos(2 * np.pi * xx / N) * np.sin(2 * np.pi * yy / N)
series = np.stack([amp * bl ** (f + 1) for f in range(M)])
vol_data = fft2(series)
pfull = AcqParams(n_grid=N, k_seg=N // M if N % M == 0 else 8, m_delay=0, dt=1e-3)
# fully sampled mask: build manually
from epib0.acquisition import SamplingMask, KTVolume
full_lines = np.ones((M, N), dtype=bool)
smask_full = SamplingMask(AcqParams(N, N // M, 0, 1e-3), full_lines, np.zeros((M, N), bool))
vol = KTVolume(vol_data, smask_full)
Ts = build_Ts(vol, spec)
print("Ts shape:", Ts.shape)
# true filter: F of [1, -beta_bl] scaled
d_true_img = np.stack([np.ones((N, N), complex), -bl])
d_hat_full = fft2(d_true_img) / N**2
# restrict to Lambda
ox = spec.x_offsets % N
oy = spec.y_offsets % N
d_true = np.concatenate([d_hat_full[t][np.ix_(oy, ox)][::, ::].reshape(-1) for t in (0, 1)])
# check ordering matches: entry (tap, iy, ix) at (oy[iy], ox[ix]), kx fastest
resid = np.linalg.norm(Ts @ d_true) / (np.linalg.norm(Ts, 2) * np.linalg.norm(d_true))
print("annihilation resid:", resid)
# zero-pad energy outside Lambda?
mask_l = np.zeros((2, N, N), bool)
mask_l[:, oy[:, None], ox[None, :]] = True
print("filter energy outside Lambda:", np.linalg.norm(d_hat_full[~mask_l]) / np.linalg.norm(d_hat_full))

# estimate_filter_smooth recovery
d_est = estimate_filter_smooth(Ts, spec, mu0=0.0)
bm = filter_to_beta(d_est, spec, N, k_delay=1, frame_dt=1e-3)
print("filter_to_beta max err (mu0=0):", np.abs(bm.values - bl).max())
d_est2 = estimate_filter_smooth(Ts, spec, mu0=1e-5)
bm2 = filter_to_beta(d_est2, spec, N, k_delay=1, frame_dt=1e-3)
print("filter_to_beta max err (mu0=1e-5):", np.abs(bm2.values - bl).max())

# --- 3. lift ops vs dense --------------------------------------------------
Ns, Ms = 8, 6
spec_s = FilterSpec(3, 2, delta=2)
vs = rng.standard_normal((Ms, Ns, Ns)) + 1j * rng.standard_normal((Ms, Ns, Ns))
cols = rng.standard_normal((spec_s.size, 3)) + 1j * rng.standard_normal((spec_s.size, 3))
out = lift_apply(vs, spec_s, cols)
# dense oracle
ox = spec_s.x_offsets
oy = spec_s.y_offsets
ref = np.zeros_like(out)
for l in range(3):
    d = cols[:, l].reshape(2, spec_s.fy, spec_s.fx)
    for f in range(spec_s.delta, Ms):
        for ky in range(oy.max(), Ns + oy.min()):
            for kx in range(ox.max(), Ns + ox.min()):
                acc = 0
                for c, fr in ((0, f), (1, f - spec_s.delta)):
                    for iy in range(spec_s.fy):
                        for ix in range(spec_s.fx):
                            acc += d[c, iy, ix] * vs[fr, ky - oy[iy], kx - ox[ix]]
                ref[l, f, ky, kx] = acc
print("lift_apply vs dense:", np.abs(out - ref).max() / np.abs(ref).max())
# adjoint test
res = rng.standard_normal(out.shape) + 1j * rng.standard_normal(out.shape)
from epib0.lifting import interior_mask
box = interior_mask(spec_s, Ns)
res *= box
res[:, :spec_s.delta] = 0
lhs = np.vdot(res, out)
rhs = np.vdot(lift_adjoint(res, spec_s, cols), vs)
print("lift adjoint rel:", abs(lhs - rhs) / abs(lhs))

# gram_full vs dense patches
R = gram_full(vs, spec_s)
Tfull_rows = []
for f in range(spec_s.delta, Ms):
    for ky in range(oy.max(), Ns + oy.min()):
        for kx in range(ox.max(), Ns + ox.min()):
            row = []
            for c, fr in ((0, f), (1, f - spec_s.delta)):
                for iy in range(spec_s.fy):
                    for ix in range(spec_s.fx):
                        row.append(vs[fr, ky - oy[iy], kx - ox[ix]])
            Tfull_rows.append(row)
Tfull = np.array(Tfull_rows)
print("gram_full err:", np.linalg.norm(R - Tfull.conj().T @ Tfull) / np.linalg.norm(R))

# --- 4. phantom end-to-end -------------------------------------------------
spec_ph = PhantomSpec()
sim = simulate(spec_ph, seed=1)
params = sim["params"]
rho0, gamma, fg = sim["rho0"], sim["gamma"], sim["foreground"]
print("fg fraction:", fg.mean(), "max |omega| Hz:", np.abs(gamma.omega_hz).max(),
      "max R2*:", gamma.r2star.max())

unc = nrmse(ifft_recon(sim["kspace1"][0]), rho0, fg)
print("uncorrected NRMSE:", unc)

t0 = time.perf_counter()
res_s = correct(sim["kspace1"][0], sim["kspace2"][0], params, CorrectConfig(method="smoothness"))
t_s = time.perf_counter() - t0
m = evaluate(res_s, rho0, gamma, fg)
print(f"smoothness: {t_s:.2f}s", m, "ratio:", unc / m["nrmse_alpha"])

t0 = time.perf_counter()
res_l = correct(sim["kspace1"][0], sim["kspace2"][0], params, CorrectConfig(method="lowrank"))
t_l = time.perf_counter() - t0
ml = evaluate(res_l, rho0, gamma, fg)
print(f"lowrank: {t_l:.2f}s", ml, "ratio:", unc / ml["nrmse_alpha"])
print("omega agreement smooth vs lowrank (RMSE Hz):",
      rmse(res_s.omega_hz, res_l.omega_hz, fg))
fg_est = res_l.beta.foreground
print("classification agreement:", (fg_est == fg).mean())

# direct method
res_d = direct_method(sim["kspace1"][0], sim["kspace2"][0], params)
md = evaluate(res_d, rho0, gamma, fg)
print("direct:", md)

# solve with true beta
beta_true = gamma.beta(params.dt)
sm_fine = build_masks(params.retier(1))
vol_fine = combine_dual_echo(sim["kspace1"][0], sim["kspace2"][0], params.retier(1))
a_true, info = solve_alpha(vol_fine.data, beta_true, sm_fine, eps_rel=1e-6, max_iter=300, tol=1e-12)
print("true-beta solve NRMSE:", nrmse(a_true, rho0, fg), np.linalg.norm(a_true - rho0) / np.linalg.norm(rho0), info["iterations"])
