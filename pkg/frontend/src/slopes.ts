/** Least-squares slope of log(err) against log(h); the only numerics here. */

export function leastSquaresSlope(h: number[], err: number[]): number {
  if (h.length !== err.length || h.length < 2) {
    throw new Error(`need at least 2 levels to fit a slope, got ${h.length}`);
  }
  const x = h.map(Math.log);
  const y = err.map((e) => {
    if (!(e > 0)) throw new Error(`errors must be positive for a log fit, got ${e}`);
    return Math.log(e);
  });
  const xm = x.reduce((a, b) => a + b, 0) / x.length;
  const ym = y.reduce((a, b) => a + b, 0) / y.length;
  let num = 0;
  let den = 0;
  for (let i = 0; i < x.length; i++) {
    num += (x[i] - xm) * (y[i] - ym);
    den += (x[i] - xm) ** 2;
  }
  if (den === 0) throw new Error("all mesh sizes are equal; slope undefined");
  return num / den;
}
