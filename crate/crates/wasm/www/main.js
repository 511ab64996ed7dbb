import init, { transmission, pole_sweep, sample, mode_sweep } from "./pkg/cavspec_wasm.js";

const POLE_STRIDE = 6;
const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function params() {
  const shape = $("shape").value;
  const width = num("width");
  const omega = num("omega");
  const profile = shape === "gaussian"
    ? { kind: "gaussian", center: 0, stddev: width, strength: omega }
    : { kind: "lorentzian", center: 0, width, strength: omega };
  return {
    profile, width, omega,
    kappa: num("kappa"),
    gamma: num("gamma"),
    delta: num("delta"),
    spins: Math.round(num("spins")),
    seed: Math.round(num("seed")),
  };
}

function density(p) {
  return JSON.stringify({ ...p.profile, gamma_hom: p.gamma });
}

function linspace(lo, hi, n) {
  return Array.from({ length: n }, (_, i) => lo + ((hi - lo) * i) / (n - 1));
}

// Minimal axes: frame, five ticks per side, labels.
function frame(canvas, xr, yr, xlabel, ylabel) {
  const dpr = window.devicePixelRatio || 1;
  canvas.width = canvas.clientWidth * dpr;
  canvas.height = canvas.clientHeight * dpr;
  const ctx = canvas.getContext("2d");
  ctx.scale(dpr, dpr);
  const w = canvas.clientWidth, h = canvas.clientHeight;
  const m = { l: 56, r: 12, t: 10, b: 36 };
  const sx = (x) => m.l + ((x - xr[0]) / (xr[1] - xr[0])) * (w - m.l - m.r);
  const sy = (y) => h - m.b - ((y - yr[0]) / (yr[1] - yr[0])) * (h - m.t - m.b);
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(m.l, m.t, w - m.l - m.r, h - m.t - m.b);
  ctx.fillStyle = "#333";
  ctx.font = "11px system-ui";
  for (let i = 0; i <= 4; i++) {
    const x = xr[0] + ((xr[1] - xr[0]) * i) / 4;
    const y = yr[0] + ((yr[1] - yr[0]) * i) / 4;
    ctx.textAlign = "center";
    ctx.fillText(x.toPrecision(3), sx(x), h - m.b + 14);
    ctx.textAlign = "right";
    ctx.fillText(y.toPrecision(3), m.l - 4, sy(y) + 4);
  }
  ctx.textAlign = "center";
  ctx.fillText(xlabel, (m.l + w - m.r) / 2, h - 4);
  ctx.save();
  ctx.translate(12, (m.t + h - m.b) / 2);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(ylabel, 0, 0);
  ctx.restore();
  ctx.beginPath();
  ctx.rect(m.l, m.t, w - m.l - m.r, h - m.t - m.b);
  ctx.clip();
  return { ctx, sx, sy };
}

function line(plot, xs, ys, color, dash = []) {
  const { ctx, sx, sy } = plot;
  ctx.strokeStyle = color;
  ctx.setLineDash(dash);
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  let pen = false;
  xs.forEach((x, i) => {
    const y = ys[i];
    if (!Number.isFinite(y)) { pen = false; return; }
    pen ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y));
    pen = true;
  });
  ctx.stroke();
  ctx.setLineDash([]);
}

function guarded(fn) {
  return () => {
    $("status").textContent = "";
    try {
      fn();
    } catch (e) {
      $("status").textContent = e.message || String(e);
    }
  };
}

function drawSpectrum() {
  const p = params();
  const span = p.omega + 4 * p.width;
  const n = 1201;
  const xs = linspace(-span, span, n);
  const t = transmission(density(p), p.delta, p.kappa, -span, span, n);
  const peak = Math.max(...t.filter(Number.isFinite));
  const plot = frame($("spectrum"), [-span, span], [0, 1.05], "ω", "|χ|² / max");
  line(plot, xs, Array.from(t, (v) => v / peak), "#1f5fa8");
}

function drawPoles() {
  const p = params();
  const hi = 3 * p.width;
  const n = 241;
  const raw = pole_sweep(density(p), p.delta, p.kappa, hi / n, hi, n);
  const rows = [];
  for (let i = 0; i < raw.length; i += POLE_STRIDE) rows.push(raw.slice(i, i + POLE_STRIDE));
  const om = rows.map((r) => r[0]);
  const ymax = Math.max(...rows.map((r) => Math.max(Math.abs(r[1]), Math.abs(r[3]), -r[2], -r[4])));
  const plot = frame($("poles"), [0, hi], [-ymax, ymax * 1.05], "Ω", "E");
  plot.ctx.fillStyle = "rgba(31, 95, 168, 0.08)";
  rows.forEach((r, i) => {
    if (r[5] === 1 && i + 1 < rows.length) {
      const x0 = plot.sx(r[0]), x1 = plot.sx(rows[i + 1][0]);
      plot.ctx.fillRect(x0, 0, x1 - x0, plot.ctx.canvas.height);
    }
  });
  line(plot, om, rows.map((r) => r[1]), "#c0392b");
  line(plot, om, rows.map((r) => r[3]), "#1f5fa8");
  line(plot, om, rows.map((r) => -r[2]), "#c0392b", [5, 4]);
  line(plot, om, rows.map((r) => -r[4]), "#1f5fa8", [5, 4]);
  const { ctx, sx } = plot;
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(sx(p.omega), 0);
  ctx.lineTo(sx(p.omega), ctx.canvas.height);
  ctx.stroke();
}

function drawModes() {
  const p = params();
  // Sampled spins inherit the homogeneous linewidth as their decay.
  const ensemble = sample(density(p), p.spins, p.seed);
  const span = p.omega + 4 * p.width;
  const n = 161;
  const raw = mode_sweep(ensemble, p.kappa, -span, span, n);
  const plot = frame($("modes"), [-span, span], [-span - p.omega, span + p.omega], "cavity frequency ω_c", "Re E");
  const { ctx, sx, sy } = plot;
  for (let i = 0; i < raw.length; i += 3) {
    const f = raw[i + 2];
    ctx.fillStyle = `rgba(20, 40, 90, ${0.08 + 0.92 * f})`;
    ctx.fillRect(sx(raw[i]) - 1.5, sy(raw[i + 1]) - 1.5, 3, 3);
  }
}

await init();
$("run-spectrum").onclick = guarded(drawSpectrum);
$("run-poles").onclick = guarded(drawPoles);
$("run-modes").onclick = guarded(drawModes);
for (const id of ["shape", "width", "omega", "kappa", "gamma", "delta"]) {
  $(id).addEventListener("change", guarded(() => { drawSpectrum(); drawPoles(); }));
}
guarded(() => { drawSpectrum(); drawPoles(); drawModes(); })();
