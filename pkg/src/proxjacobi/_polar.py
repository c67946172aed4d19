"""Polar-form AC power balance functions and their analytic gradients.

Shared between the builtin equality functions in :mod:`proxjacobi.model`
and the network utilities in :mod:`proxjacobi.problems`.
"""

import numpy as np


def balance_terms(i, V, theta, y_diag_re, y_diag_im, neighbors, y_re, y_im):
    """Evaluate (c_re, c_im) at bus ``i``.

    c_re = Yre_ii V_i^2 + sum_j V_i V_j [Yre_ij cos(th_i - th_j)
                                         + Yim_ij sin(th_i - th_j)]
    c_im = -Yim_ii V_i^2 + sum_j V_i V_j [Yre_ij sin(th_i - th_j)
                                          - Yim_ij cos(th_i - th_j)]

    ``neighbors`` indexes the buses j in N_i; ``y_re``/``y_im`` are the
    matching off-diagonal admittance entries Y_ij.
    """
    vi = V[i]
    c_re = y_diag_re * vi * vi
    c_im = -y_diag_im * vi * vi
    if len(neighbors):
        nbr = np.asarray(neighbors, dtype=int)
        gre = np.asarray(y_re, dtype=float)
        gim = np.asarray(y_im, dtype=float)
        d = theta[i] - theta[nbr]
        cs, sn = np.cos(d), np.sin(d)
        vv = vi * V[nbr]
        c_re += float(np.sum(vv * (gre * cs + gim * sn)))
        c_im += float(np.sum(vv * (gre * sn - gim * cs)))
    return c_re, c_im


def balance_hessians(i, V, theta, y_diag_re, y_diag_im, neighbors, y_re, y_im):
    """Hessians of (c_re, c_im) with respect to the stacked vector (V, theta).

    Returns ``(H_re, H_im)``, each dense of shape (2 nb, 2 nb) with V
    coordinates first.  With a_j = Yre_ij cos(d) + Yim_ij sin(d) and
    b_j = Yre_ij sin(d) - Yim_ij cos(d) for d = th_i - th_j, the balance
    terms are c_re = Yre_ii V_i^2 + sum_j V_i V_j a_j and
    c_im = -Yim_ii V_i^2 + sum_j V_i V_j b_j, and da/dd = -b, db/dd = a.
    """
    nb = len(V)
    H_re = np.zeros((2 * nb, 2 * nb))
    H_im = np.zeros((2 * nb, 2 * nb))
    vi = V[i]
    H_re[i, i] = 2.0 * y_diag_re
    H_im[i, i] = -2.0 * y_diag_im
    if len(neighbors):
        nbr = np.asarray(neighbors, dtype=int)
        gre = np.asarray(y_re, dtype=float)
        gim = np.asarray(y_im, dtype=float)
        d = theta[i] - theta[nbr]
        a = gre * np.cos(d) + gim * np.sin(d)
        b = gre * np.sin(d) - gim * np.cos(d)
        vj = V[nbr]
        ti, tj = nb + i, nb + nbr
        for H, u, w in ((H_re, a, b), (H_im, b, -a)):
            # u is the coefficient in c = ... + sum V_i V_j u_j; du/dd = -w
            H[i, nbr] = H[nbr, i] = u
            H[i, ti] += -np.sum(vj * w)
            H[ti, i] += -np.sum(vj * w)
            H[i, tj] = H[tj, i] = vj * w
            H[nbr, ti] = H[ti, nbr] = -vi * w
            H[nbr, tj] = H[tj, nbr] = vi * w
            H[ti, ti] += -np.sum(vi * vj * u)
            H[ti, tj] = H[tj, ti] = vi * vj * u
            H[tj, tj] = -vi * vj * u
    return H_re, H_im


def balance_gradients(i, V, theta, y_diag_re, y_diag_im, neighbors, y_re, y_im):
    """Gradients of (c_re, c_im) with respect to (V, theta).

    Returns ``(dre_dV, dre_dth, dim_dV, dim_dth)``, each a dense vector of
    length ``len(V)``.
    """
    nb = len(V)
    dre_dV = np.zeros(nb)
    dre_dth = np.zeros(nb)
    dim_dV = np.zeros(nb)
    dim_dth = np.zeros(nb)
    vi = V[i]
    dre_dV[i] = 2.0 * y_diag_re * vi
    dim_dV[i] = -2.0 * y_diag_im * vi
    if len(neighbors):
        nbr = np.asarray(neighbors, dtype=int)
        gre = np.asarray(y_re, dtype=float)
        gim = np.asarray(y_im, dtype=float)
        d = theta[i] - theta[nbr]
        cs, sn = np.cos(d), np.sin(d)
        vj = V[nbr]
        # real part
        dre_dV[i] += float(np.sum(vj * (gre * cs + gim * sn)))
        np.add.at(dre_dV, nbr, vi * (gre * cs + gim * sn))
        dre_dth[i] = float(np.sum(vi * vj * (-gre * sn + gim * cs)))
        np.add.at(dre_dth, nbr, vi * vj * (gre * sn - gim * cs))
        # imaginary part
        dim_dV[i] += float(np.sum(vj * (gre * sn - gim * cs)))
        np.add.at(dim_dV, nbr, vi * (gre * sn - gim * cs))
        dim_dth[i] = float(np.sum(vi * vj * (gre * cs + gim * sn)))
        np.add.at(dim_dth, nbr, -vi * vj * (gre * cs + gim * sn))
    return dre_dV, dre_dth, dim_dV, dim_dth
