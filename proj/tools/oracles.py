"""Independent reference values for the test suite (sympy / scipy).

Run once; the printed numbers are frozen into tests/.
"""
import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp, trapezoid

x1, x2, x3 = sp.symbols("x1 x2 x3")
X = [x1, x2, x3]
f2 = [x1, x2, -2 * x1**2 - 2 * x2**2 + 4 * x3]
y = [x1**2 + x2**2 + x3]
ybar = [2 * x1 - x2**2 + x3, -(x1**2) + x2 + x3]


def lie(h, f):
    return sum(sp.diff(h, v) * fv for v, fv in zip(X, f))


def lie_rank(hs, f, x0, order=3):
    rows = []
    for h in hs:
        g = h
        for _ in range(order):
            rows.append([sp.diff(g, v) for v in X])
            g = sp.expand(lie(g, f))
    M = sp.Matrix(rows).subs(dict(zip(X, x0)))
    return M.rank()


def rhs2(t, s):
    return [s[0], s[1], -2 * s[0] ** 2 - 2 * s[1] ** 2 + 4 * s[2]]


def simulate(x0, tf=1.0):
    ts = np.linspace(0, tf, 1001)
    sol = solve_ivp(rhs2, (0, tf), x0, t_eval=ts, rtol=1e-12, atol=1e-12, method="DOP853")
    return sol.t, sol.y


def meas(hs, states):
    fns = [sp.lambdify(X, h, "numpy") for h in hs]
    return np.array([fn(*states) * np.ones(states.shape[1]) for fn in fns])


def gramian(hs, x0, eps=1e-4, tf=1.0):
    n = 3
    ts = np.linspace(0, tf, 1001)
    cols = []
    for i in range(n):
        outs = []
        for sgn in (1, -1):
            xp = np.array(x0, float)
            xp[i] += sgn * eps
            sol = solve_ivp(rhs2, (0, tf), xp, t_eval=ts, rtol=1e-12, atol=1e-14, method="DOP853")
            outs.append(meas(hs, sol.y))
        cols.append(outs[0] - outs[1])
    G = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            integrand = np.sum(cols[a] * cols[b], axis=0)
            G[a, b] = trapezoid(integrand, ts) / (4 * eps**2)
    s = np.linalg.svd(G, compute_uv=False)
    return s, int(np.sum(s > s[0] * 1e-6))


print("L_f y =", sp.simplify(lie(y[0], f2)))
psi5 = -(x1**2) - x2**2 + x3
print("L_f psi5 - 4 psi5 =", sp.simplify(lie(psi5, f2) - 4 * psi5))
print("lie rank y  @[1,2,1]:", lie_rank(y, f2, [1, 2, 1]))
print("lie rank yb @[1,2,1]:", lie_rank(ybar, f2, [1, 2, 1]))
print("gramian y :", gramian(y, [1, 2, 1]))
print("gramian yb:", gramian(ybar, [1, 2, 1]))

_, sa = simulate([1, 2, 1])
_, sb = simulate([2, 1, 1])
print("x1(1) =", repr(sa[0, -1]), "e =", repr(np.e))
print("dist y    =", repr(np.max(np.abs(meas(y, sa) - meas(y, sb)))))
print("dist ybar =", repr(np.max(np.abs(meas(ybar, sa) - meas(ybar, sb)))))
print("closed form 2e+3e^2 =", repr(2 * np.e + 3 * np.e**2))

Au = np.array([[-2, 1, 1], [1, -2, 1], [1, 1, -2]], float)
Ad = np.array([[-1, 0, 1], [1, -1, 0], [0, 1, -1]], float)
print("eig Au =", np.sort_complex(np.linalg.eigvals(Au)))
ev = np.linalg.eigvals(Ad)
print("eig Ad =", ev, "abs", np.abs(ev), "angle/pi", np.angle(ev) / np.pi)
print("charpoly Ad =", sp.Matrix(Ad.astype(int)).charpoly().as_expr())

# directed consensus: psi_d2 = x1 + w x2 + conj(w) x3, P = [2,3,1]: (Px)_2 = x1, (Px)_3 = x2, (Px)_1 = x3
w = np.exp(2j * np.pi / 3)
rng = np.random.default_rng(0)
xs = rng.uniform(-2, 2, 3)
Px = np.empty(3)
Px[[1, 2, 0]] = xs
psi = lambda v: v[0] + w * v[1] + np.conj(w) * v[2]
print("c_d2 =", psi(Px) / psi(xs), "omega =", w)

# consensus limit
sol = solve_ivp(lambda t, s: Au @ s, (0, 10), [1, 2, 3], rtol=1e-12, atol=1e-12)
print("undirected x(10) =", sol.y[:, -1])

# NEMS synchronized state: a=1, phi=c
a, b = 1.0, 0.1
print("sync dphi =", a * 1 + (b / 2) * (np.cos(0) + np.cos(0) - 2))
