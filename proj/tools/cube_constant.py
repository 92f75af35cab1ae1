#!/usr/bin/env python3
"""Mean of 1/|r| over the unit cube centred at the origin.

This is the self-interaction entry of the grid Green's function. Prints the
closed form next to a high-precision quadrature over one octant.
"""
import mpmath as mp

mp.mp.dps = 30

closed = 3 * mp.log((mp.sqrt(3) + 1) / (mp.sqrt(3) - 1)) - mp.pi / 2
quad = 8 * mp.quad(lambda a, b, c: 1 / mp.sqrt(a * a + b * b + c * c), [0, 0.5], [0, 0.5], [0, 0.5])
print(f"closed form {mp.nstr(closed, 20)}")
print(f"quadrature  {mp.nstr(quad, 20)}")
