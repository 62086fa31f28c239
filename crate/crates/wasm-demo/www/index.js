import init, { attenuation, evidenceCurve, posterior } from "./pkg/measerr_wasm.js";

const num = (id) => Number(document.getElementById(id).value);
const seed = (id) => BigInt(Math.trunc(num(id)));
const out = (id) => document.getElementById(id);

function show(id, text, isError = false) {
  const el = out(id);
  el.textContent = text;
  el.className = isError ? "out error" : "out";
}

function frame(canvas, xs, ys, xLabel, yLabel) {
  const ctx = canvas.getContext("2d");
  const pad = 45;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (canvas.width - 2 * pad);
  const sy = (y) => canvas.height - pad - ((y - y0) / (y1 - y0 || 1)) * (canvas.height - 2 * pad);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, canvas.width - 2 * pad, canvas.height - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.fillText(xLabel, canvas.width / 2, canvas.height - 10);
  ctx.fillText(yLabel, 5, pad - 10);
  ctx.fillText(x0.toPrecision(3), pad, canvas.height - pad + 15);
  ctx.fillText(x1.toPrecision(3), canvas.width - pad - 30, canvas.height - pad + 15);
  ctx.fillText(y0.toPrecision(3), 5, canvas.height - pad);
  ctx.fillText(y1.toPrecision(3), 5, pad + 10);
  return { ctx, sx, sy };
}

function line(ctx, sx, sy, x0, y0, x1, y1, color) {
  ctx.strokeStyle = color;
  ctx.beginPath();
  ctx.moveTo(sx(x0), sy(y0));
  ctx.lineTo(sx(x1), sy(y1));
  ctx.stroke();
}

function runAttenuation() {
  const r = JSON.parse(attenuation(num("att-n"), num("att-tau-e"), num("att-beta"), seed("att-seed")));
  show(
    "att-out",
    `reliability of ln W          ${r.reliability.toFixed(3)}\n` +
      `slope on ln X (true)         ${r.slope_true_exposure.toFixed(4)}\n` +
      `slope on ln W (observed)     ${r.slope_observed.toFixed(4)}\n` +
      `observed / reliability       ${r.slope_corrected.toFixed(4)}`,
  );
  const xs = r.points.map((p) => p[0]);
  const ys = r.points.map((p) => p[1]);
  const { ctx, sx, sy } = frame(out("att-plot"), xs, ys, "ln W", "Y");
  ctx.fillStyle = "rgba(40, 90, 160, 0.4)";
  for (const [x, y] of r.points) ctx.fillRect(sx(x) - 1.5, sy(y) - 1.5, 3, 3);
  const [lo, hi] = [Math.min(...xs), Math.max(...xs)];
  const mean = ys.reduce((a, b) => a + b, 0) / ys.length;
  line(ctx, sx, sy, lo, mean + r.slope_observed * lo, hi, mean + r.slope_observed * hi, "#c33");
  line(ctx, sx, sy, lo, mean + r.slope_true_exposure * lo, hi, mean + r.slope_true_exposure * hi, "#3a3");
}

function runEvidence() {
  const r = JSON.parse(evidenceCurve(num("ev-n"), num("ev-sigma"), num("ev-lambda"), num("ev-pnull"), seed("ev-seed")));
  const last = r.delta.length - 1;
  show("ev-out", `posterior odds of the null at n = ${r.n[last]}: ${r.delta[last].toPrecision(4)}`);
  const xs = r.n.map(Math.log10);
  const ys = r.delta.map(Math.log10);
  const { ctx, sx, sy } = frame(out("ev-plot"), xs, [...ys, 0], "log10 n", "log10 Δ");
  line(ctx, sx, sy, xs[0], 0, xs[last], 0, "#aaa");
  ctx.strokeStyle = "#2060a0";
  ctx.beginPath();
  xs.forEach((x, k) => (k ? ctx.lineTo(sx(x), sy(ys[k])) : ctx.moveTo(sx(x), sy(ys[k]))));
  ctx.stroke();
}

function runPosterior() {
  const prior = document.getElementById("post-prior").value;
  const r = JSON.parse(posterior(num("post-n"), num("post-beta"), prior, num("post-keep"), seed("post-seed")));
  const fmt = (s) => `${s.mean.toFixed(3)} [${s.lo.toFixed(3)}, ${s.hi.toFixed(3)}]`;
  show(
    "post-out",
    `naive slope on ln W    ${r.naive_slope.toFixed(4)}\n` +
      `adjusted β             ${fmt(r.beta)}   R-hat ${r.rhat_beta.toFixed(3)}\n` +
      `error precision τe     ${fmt(r.tau_e)}`,
  );
  const edges = r.histogram_edges;
  const counts = r.histogram_counts;
  const { ctx, sx, sy } = frame(out("post-plot"), edges, [0, ...counts], "β", "draws");
  ctx.fillStyle = "rgba(40, 90, 160, 0.6)";
  counts.forEach((c, k) => {
    const left = sx(edges[k]);
    ctx.fillRect(left, sy(c), sx(edges[k + 1]) - left - 1, sy(0) - sy(c));
  });
  line(ctx, sx, sy, r.naive_slope, 0, r.naive_slope, Math.max(...counts), "#c33");
}

function wire(button, output, run) {
  document.getElementById(button).addEventListener("click", () => {
    try {
      run();
    } catch (e) {
      show(output, String(e), true);
    }
  });
}

await init();
wire("att-run", "att-out", runAttenuation);
wire("ev-run", "ev-out", runEvidence);
wire("post-run", "post-out", runPosterior);
runAttenuation();
runEvidence();
