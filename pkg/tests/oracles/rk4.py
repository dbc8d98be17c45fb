"""Fixed-step classical Runge-Kutta in strip arclength, started at the waist."""

import math

TWO_PI = 2 * math.pi


def _rhs(y):
    th, t, b = y
    sb = math.sin(b)
    return (math.cos(b), sb, sb * (math.tan(th) + 2.0 / math.tan(th)))


def _step(y, h):
    k1 = _rhs(y)
    k2 = _rhs([y[i] + 0.5 * h * k1[i] for i in range(3)])
    k3 = _rhs([y[i] + 0.5 * h * k2[i] for i in range(3)])
    k4 = _rhs([y[i] + h * k3[i] for i in range(3)])
    return [y[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(3)]


def half_separation(theta_w, h, theta_stop=2e-3):
    """t_ideal - t_waist along the branch leaving the waist towards theta = 0."""
    c = TWO_PI * math.cos(theta_w) / math.sin(theta_w) ** 2
    y = [theta_w, 0.0, 0.5 * math.pi]
    while True:
        y_new = _step(y, h)
        if y_new[0] <= theta_stop:
            w = (y[0] - theta_stop) / (y[0] - y_new[0])
            t_stop = y[1] + w * (y_new[1] - y[1])
            return t_stop + c / TWO_PI * (theta_stop**3 / 3 + theta_stop**5 / 30)
        y = y_new
