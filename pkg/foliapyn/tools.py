import numpy as np
import scipy.linalg


def lin_fit(x, y):
    m, c = np.polyfit(x, y, 1)
    y_fit = x * m + c
    std = np.std(y - y_fit)

    return x, y_fit, m, c, std


def observed_order(spacings, errors):
    """Estimate the convergence order of a discretization from errors measured
    at several grid spacings.

    The order is the slope of the linear fit of ``log(error)`` against
    ``log(spacing)``.

    :param spacings: Grid spacings, at least two.
    :param errors: Positive errors measured at those spacings.
    :return: The fitted order as float.
    """
    spacings = np.asarray(spacings, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if spacings.size < 2 or spacings.shape != errors.shape:
        raise ValueError('Need at least two (spacing, error) pairs of equal length')
    if np.any(errors <= 0) or np.any(spacings <= 0):
        raise ValueError('Spacings and errors must be positive')
    _, _, m, _, _ = lin_fit(np.log(spacings), np.log(errors))
    return float(m)


def as_columns(basis, n):
    """Stack a basis given as sequence of vectors (or cochains) into a matrix
    of shape ``(n, m)``."""
    if isinstance(basis, np.ndarray) and basis.ndim == 2:
        columns = basis
    else:
        vectors = [np.asarray(getattr(b, 'values', b), dtype=float) for b in basis]
        if not vectors:
            return np.zeros((n, 0))
        columns = np.column_stack(vectors)
    if columns.shape[0] != n:
        raise ValueError('Basis vectors have length {}, expected {}'.format(columns.shape[0], n))
    return np.asarray(columns, dtype=float)


def singular_values(a):
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros(0)
    return scipy.linalg.svdvals(a)


def max_column_angle(columns, basis, dimension=None):
    """Largest angle between a column of ``columns`` and the span of the
    orthonormal columns of ``basis``.

    Every column is measured against its own norm, so a badly scaled set of
    columns keeps full accuracy. Zero columns are skipped.

    :param dimension: Dimension of the span of ``columns``. When it differs
                      from the number of basis columns the result is
                      ``pi / 2``.
    """
    columns = np.asarray(columns, dtype=float)
    basis = np.asarray(basis, dtype=float)
    if dimension is not None and dimension != basis.shape[1]:
        return np.pi / 2
    norms = np.linalg.norm(columns, axis=0)
    columns = columns[:, norms > 0] / norms[norms > 0]
    if columns.shape[1] == 0:
        return 0.
    residual = columns - basis @ (basis.T @ columns)
    sine = float(np.max(np.linalg.norm(residual, axis=0)))
    return float(np.arcsin(min(1., sine)))
