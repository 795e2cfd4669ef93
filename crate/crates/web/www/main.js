import init, { basisCurves, uniformityExplorer, prohorovCurve } from "./pkg/ntgof_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#393b79", "#637939"];
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// Axes box mapping data coordinates to the canvas.
function frame(canvas, xmin, xmax, ymin, ymax) {
  const ctx = canvas.getContext("2d");
  const pad = 36;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(ymax.toPrecision(3), 2, pad + 4);
  ctx.fillText(ymin.toPrecision(3), 2, pad + h);
  ctx.fillText(xmin.toPrecision(3), pad, pad + h + 14);
  ctx.fillText(xmax.toPrecision(3), pad + w - 24, pad + h + 14);
  const sx = (x) => pad + ((x - xmin) / (xmax - xmin || 1)) * w;
  const sy = (y) => pad + h - ((y - ymin) / (ymax - ymin || 1)) * h;
  return { ctx, sx, sy, pad, w, h };
}

function line(f, xs, ys, color, dash = []) {
  f.ctx.strokeStyle = color;
  f.ctx.setLineDash(dash);
  f.ctx.beginPath();
  xs.forEach((x, i) => (i ? f.ctx.lineTo(f.sx(x), f.sy(ys[i])) : f.ctx.moveTo(f.sx(x), f.sy(ys[i]))));
  f.ctx.stroke();
  f.ctx.setLineDash([]);
}

function legend(f, labels) {
  labels.forEach(([text, color], i) => {
    f.ctx.fillStyle = color;
    f.ctx.fillText(text, f.pad + f.w - 150, f.pad + 14 + 13 * i);
  });
}

function guarded(fn) {
  return () => {
    try {
      $("status").textContent = "";
      fn();
    } catch (e) {
      $("status").innerHTML = `<span class="err">${e.message ?? e}</span>`;
    }
  };
}

function drawBasis() {
  const r = JSON.parse(basisCurves(num("bk"), 300));
  const all = r.curves.flat();
  const f = frame($("bcanvas"), 0, 1, Math.min(...all), Math.max(...all));
  r.curves.forEach((c, j) => line(f, r.x, c, COLORS[j % COLORS.length]));
  legend(f, r.curves.map((_, j) => [`b_${j + 1}`, COLORS[j % COLORS.length]]));
}

function runUniformity() {
  const r = JSON.parse(uniformityExplorer(num("un"), num("uj"), num("ua"), num("us"), num("ur")));
  const bins = r.histogram.length;
  const expected = r.n / bins;
  const f = frame($("ucanvas"), 0, 1, 0, Math.max(...r.histogram, expected) * 1.1);
  f.ctx.fillStyle = "#9ecae1";
  r.histogram.forEach((c, i) => {
    const x0 = f.sx(i / bins);
    const x1 = f.sx((i + 1) / bins);
    f.ctx.fillRect(x0 + 1, f.sy(c), x1 - x0 - 2, f.sy(0) - f.sy(c));
  });
  line(f, [0, 1], [expected, expected], "#d62728", [4, 3]);
  const rows = r.series.map((t, i) =>
    `  k=${i + 1}  T_k=${t.toFixed(3).padStart(9)}  T_k - pi(k,n)=${r.penalized[i].toFixed(3).padStart(9)}${i + 1 === r.selected ? "  <- S" : ""}`);
  $("uout").textContent = [
    `n = ${r.n}, d(n) = ${r.dimension}, S = ${r.selected}, T_S = ${r.statistic.toFixed(4)}`,
    `critical value (5%) = ${r.critical_value.toFixed(4)}, p-value = ${r.p_value.toFixed(4)}`,
    r.p_value <= 0.05 ? "reject uniformity at 5%" : "do not reject at 5%",
    ...rows,
  ].join("\n");
}

function drawProhorov() {
  const r = JSON.parse(prohorovCurve(num("pk"), num("pn"), 200));
  const log = (v) => Math.log10(Math.max(v, 1e-300));
  const lines = r.bounds.filter((b) => b.y.length > 0);
  if (lines.length === 0) throw new Error("validity window is empty for this n; increase n");
  const ys = [...lines.flatMap((b) => b.bound.map(log)), ...r.chi_square.tail.map(log)];
  const ymin = Math.max(Math.min(...ys), -40);
  const f = frame($("pcanvas"), r.chi_square.y[0], r.chi_square.y.at(-1), ymin, Math.max(...ys, 0));
  const labels = [];
  lines.forEach((b, i) => {
    line(f, b.y, b.bound.map((v) => Math.max(log(v), ymin)), COLORS[i]);
    labels.push([`${b.envelope} (M=${b.m.toFixed(2)})`, COLORS[i]]);
  });
  line(f, r.chi_square.y, r.chi_square.tail.map((v) => Math.max(log(v), ymin)), "#555", [4, 3]);
  labels.push(["chi-square tail", "#555"]);
  line(f, [r.chi_square.y[0], r.chi_square.y.at(-1)], [0, 0], "#bbb", [2, 2]);
  legend(f, labels);
}

await init();
$("status").textContent = "";
$("bgo").onclick = guarded(drawBasis);
$("ugo").onclick = guarded(runUniformity);
$("pgo").onclick = guarded(drawProhorov);
guarded(drawBasis)();
guarded(drawProhorov)();
