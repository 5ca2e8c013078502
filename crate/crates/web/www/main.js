import init, { eigen_curves, run_packet, interaction, separation } from "./pkg/wplab_web.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, xs, series, colors, opts = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const all = series.flat().filter(Number.isFinite);
  let lo = opts.ymin ?? Math.min(...all), hi = opts.ymax ?? Math.max(...all);
  if (hi === lo) { hi += 1; lo -= 1; }
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const sx = (x) => pad + (x - x0) / (x1 - x0) * (w - 2 * pad);
  const sy = (y) => h - pad - (y - lo) / (hi - lo) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(hi.toPrecision(3), 2, pad + 4);
  ctx.fillText(lo.toPrecision(3), 2, h - pad);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 20, h - pad + 14);
  series.forEach((ys, k) => {
    ctx.strokeStyle = colors[k];
    ctx.beginPath();
    ys.forEach((y, i) => (i ? ctx.lineTo(sx(xs[i]), sy(y)) : ctx.moveTo(sx(xs[i]), sy(y))));
    ctx.stroke();
  });
  return { sx, sy };
}

function curves() {
  const r = Number($("xr").value);
  const flat = eigen_curves($("model").value, -r, r, 401);
  const xs = [], up = [], dn = [];
  for (let i = 0; i < flat.length; i += 3) {
    xs.push(flat[i]); up.push(flat[i + 1]); dn.push(flat[i + 2]);
  }
  plot($("curve-canvas"), xs, [up, dn], ["#c33", "#36c"]);
}

function packet() {
  $("packet-out").textContent = "running...";
  setTimeout(() => {
    try {
      const run = run_packet(Number($("eps").value), Number($("x0").value), Number($("xi0").value), Number($("tf").value));
      const t = Array.from(run.t);
      plot($("packet-canvas"), t, [Array.from(run.w), Array.from(run.theta), Array.from(run.minus)], ["#c33", "#393", "#36c"], { ymin: 0 });
      const sup = (a) => Math.max(...a);
      $("packet-out").textContent =
        `red ||w||_H1eps (sup ${sup(run.w).toExponential(3)}), green ||theta||_L2 (sup ${sup(run.theta).toExponential(3)}), ` +
        `blue other-mode mass (sup ${sup(run.minus).toExponential(3)})\nx(T) = ${run.path.at(-1).toFixed(4)}`;
    } catch (e) {
      $("packet-out").textContent = String(e);
    }
  }, 10);
}

function inter() {
  try {
    const eps = Number($("ieps").value), gamma = Number($("gamma").value), tf = Number($("itf").value);
    const r = interaction(eps, gamma, tf);
    const n = 501;
    const sep = Array.from(separation(tf, n));
    const ts = sep.map((_, k) => tf * k / (n - 1));
    const level = Math.pow(eps, gamma);
    const { sx, sy } = plot($("inter-canvas"), ts, [sep, sep.map(() => level)], ["#333", "#c33"], { ymin: 0 });
    const ctx = $("inter-canvas").getContext("2d");
    ctx.fillStyle = "rgba(200, 50, 50, 0.2)";
    for (let i = 3; i < r.length; i += 2) {
      ctx.fillRect(sx(r[i]), sy(level), sx(r[i + 1]) - sx(r[i]), sy(0) - sy(level));
    }
    $("inter-out").textContent =
      `|I| = ${r[0].toExponential(4)}, N = ${r[1]}, max |J| = ${r[2].toExponential(4)}, eps^gamma = ${level.toExponential(3)}`;
  } catch (e) {
    $("inter-out").textContent = String(e);
  }
}

await init();
$("curves").onclick = curves;
$("packet").onclick = packet;
$("inter").onclick = inter;
curves();
