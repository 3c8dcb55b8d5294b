// Demo driver: loads the wasm module built by `wasm-bindgen --target web`
// into ./pkg/ and wires the three exported operations to the canvases.

import init, { simulate_json, spectrum_json, holder_json } from "./pkg/jumpfrac_wasm.js";

const $ = (id) => document.getElementById(id);
const status = $("status");

function setStatus(msg, isError = false) {
  status.textContent = msg;
  status.className = isError ? "error" : "";
}

// ---------------------------------------------------------------------------
// tiny canvas plotting helpers
// ---------------------------------------------------------------------------

const COL = {
  grid: "#262d3a",
  axis: "#4a5366",
  text: "#8b93a5",
  m: "#5fb4ef",
  beta: "#f2a65a",
  spec: "#7ed491",
  jump: "#ef6a6a",
  est: "#5fb4ef",
  theory: "#f2a65a",
};

function frame(canvas) {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * dpr;
  canvas.height = h * dpr;
  const ctx = canvas.getContext("2d");
  ctx.scale(dpr, dpr);
  ctx.clearRect(0, 0, w, h);
  return { ctx, w, h };
}

function makeScale(lo, hi, outLo, outHi) {
  const span = hi - lo || 1;
  return (v) => outLo + ((v - lo) / span) * (outHi - outLo);
}

function drawAxes(ctx, box, xlo, xhi, ylo, yhi) {
  const { x0, y0, x1, y1 } = box;
  ctx.strokeStyle = COL.grid;
  ctx.fillStyle = COL.text;
  ctx.lineWidth = 1;
  ctx.font = "11px system-ui";
  const xticks = 5, yticks = 4;
  for (let i = 0; i <= xticks; i++) {
    const fx = x0 + ((x1 - x0) * i) / xticks;
    ctx.beginPath();
    ctx.moveTo(fx, y0);
    ctx.lineTo(fx, y1);
    ctx.stroke();
    const v = xlo + ((xhi - xlo) * i) / xticks;
    ctx.fillText(v.toFixed(2), fx - 10, y1 + 14);
  }
  for (let i = 0; i <= yticks; i++) {
    const fy = y1 - ((y1 - y0) * i) / yticks;
    ctx.beginPath();
    ctx.moveTo(x0, fy);
    ctx.lineTo(x1, fy);
    ctx.stroke();
    const v = ylo + ((yhi - ylo) * i) / yticks;
    ctx.fillText(v.toFixed(2), 4, fy + 4);
  }
  ctx.strokeStyle = COL.axis;
  ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
}

function polyline(ctx, xs, ys, sx, sy, color, width = 1.4) {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  for (let i = 0; i < xs.length; i++) {
    const px = sx(xs[i]), py = sy(ys[i]);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  }
  ctx.stroke();
}

function extent(arr) {
  let lo = Infinity, hi = -Infinity;
  for (const v of arr) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!(hi > lo)) { lo -= 1; hi += 1; }
  const pad = 0.06 * (hi - lo);
  return [lo - pad, hi + pad];
}

// ---------------------------------------------------------------------------
// the three views
// ---------------------------------------------------------------------------

function drawPath(data) {
  const { ctx, w, h } = frame($("path"));
  const split = h * 0.66;
  const box = { x0: 38, y0: 8, x1: w - 8, y1: split - 6 };
  const [mlo, mhi] = extent(data.m);
  const sx = makeScale(0, 1, box.x0, box.x1);
  const sy = makeScale(mlo, mhi, box.y1, box.y0);
  drawAxes(ctx, box, 0, 1, mlo, mhi);
  // jump marks as faint stems
  ctx.strokeStyle = COL.jump;
  ctx.lineWidth = 1;
  ctx.globalAlpha = 0.55;
  for (const j of data.jumps) {
    const px = sx(j.t);
    ctx.beginPath();
    ctx.moveTo(px, box.y1);
    ctx.lineTo(px, box.y1 - Math.min(26, Math.abs(j.size) * 60));
    ctx.stroke();
  }
  ctx.globalAlpha = 1;
  polyline(ctx, data.t, data.m, sx, sy, COL.m);

  // beta(t) band below
  const bbox = { x0: 38, y0: split + 8, x1: w - 8, y1: h - 18 };
  const sby = makeScale(0, 2, bbox.y1, bbox.y0);
  ctx.strokeStyle = COL.grid;
  ctx.strokeRect(bbox.x0, bbox.y0, bbox.x1 - bbox.x0, bbox.y1 - bbox.y0);
  ctx.fillStyle = COL.text;
  ctx.fillText("beta(t)", bbox.x0 + 4, bbox.y0 + 11);
  ctx.fillText("2", 22, bbox.y0 + 8);
  ctx.fillText("0", 22, bbox.y1);
  polyline(ctx, data.t, data.beta, sx, sby, COL.beta, 1.2);
}

function drawSpectrum(data) {
  const { ctx, w, h } = frame($("spectrum"));
  const box = { x0: 38, y0: 10, x1: w - 8, y1: h - 22 };
  const hmax = data.h[data.h.length - 1];
  const sx = makeScale(0, hmax, box.x0, box.x1);
  const sy = makeScale(0, 1.05, box.y1, box.y0);
  drawAxes(ctx, box, 0, hmax, 0, 1.05);
  // piecewise segments: break where d is null/undefined
  ctx.strokeStyle = COL.spec;
  ctx.lineWidth = 1.8;
  ctx.beginPath();
  let open = false;
  for (let i = 0; i < data.h.length; i++) {
    const d = data.d[i];
    if (d === null || data.flag[i] !== "ok") {
      open = false;
      continue;
    }
    const px = sx(data.h[i]), py = sy(d);
    if (!open) { ctx.moveTo(px, py); open = true; }
    else ctx.lineTo(px, py);
  }
  ctx.stroke();
  // undefined markers
  ctx.fillStyle = COL.jump;
  for (let i = 0; i < data.h.length; i++) {
    if (data.flag[i] === "undefined") {
      ctx.beginPath();
      ctx.arc(sx(data.h[i]), box.y1 - 6, 2.4, 0, Math.PI * 2);
      ctx.fill();
    }
  }
  ctx.fillStyle = COL.text;
  ctx.fillText(
    `index range [${data.gamma_inf.toFixed(2)}, ${data.gamma_sup.toFixed(2)}]` +
    (data.sigma_zero ? "" : " + diffusion"),
    box.x0 + 8, box.y0 + 12
  );
}

function drawHolder(data) {
  const { ctx, w, h } = frame($("holder"));
  const box = { x0: 38, y0: 10, x1: w - 8, y1: h - 22 };
  const sx = makeScale(0, 1, box.x0, box.x1);
  const sy = makeScale(0, 1.05, box.y1, box.y0);
  drawAxes(ctx, box, 0, 1, 0, 1.05);
  ctx.fillStyle = COL.est;
  for (let i = 0; i < data.t.length; i++) {
    ctx.beginPath();
    ctx.arc(sx(data.t[i]), sy(Math.min(data.h_hat[i], 1.05)), 3, 0, Math.PI * 2);
    ctx.fill();
  }
  ctx.strokeStyle = COL.theory;
  ctx.lineWidth = 1.4;
  for (let i = 0; i < data.t.length; i++) {
    const px = sx(data.t[i]), py = sy(data.h_theory[i]);
    ctx.beginPath();
    ctx.moveTo(px - 4, py - 4); ctx.lineTo(px + 4, py + 4);
    ctx.moveTo(px - 4, py + 4); ctx.lineTo(px + 4, py - 4);
    ctx.stroke();
  }
  ctx.fillStyle = COL.text;
  ctx.fillText("dots: oscillation estimate   x: 1/(delta beta) closed form", box.x0 + 8, box.y0 + 12);
}

// ---------------------------------------------------------------------------
// wiring
// ---------------------------------------------------------------------------

function params() {
  return {
    sigma: $("sigma").value.trim(),
    b: "0",
    beta: $("beta").value.trim(),
    zmin: parseFloat($("zmin").value),
    seed: Math.max(0, Math.floor(Number($("seed").value) || 0)),
  };
}

async function runAll() {
  const p = params();
  const btn = $("run");
  btn.disabled = true;
  setStatus("simulating...");
  try {
    const t0 = performance.now();
    const path = JSON.parse(simulate_json(p.sigma, p.b, p.beta, p.zmin, p.seed));
    drawPath(path);
    const spec = JSON.parse(spectrum_json(p.sigma, p.b, p.beta, p.zmin, p.seed, 512));
    drawSpectrum(spec);
    const hold = JSON.parse(holder_json(p.sigma, p.b, p.beta, p.zmin, p.seed, 80));
    drawHolder(hold);
    const ms = (performance.now() - t0).toFixed(0);
    setStatus(`done in ${ms} ms — ${path.n_jumps} jumps, beta(0) = ${path.beta0.toFixed(3)}`);
  } catch (e) {
    setStatus(String(e), true);
  } finally {
    btn.disabled = false;
  }
}

$("run").addEventListener("click", runAll);
$("reseed").addEventListener("click", () => {
  $("seed").value = Math.floor(Math.random() * 1e6);
  runAll();
});
$("preset").addEventListener("change", (ev) => {
  const v = ev.target.value;
  if (!v) return;
  const [beta, sigma] = v.split("|");
  $("beta").value = beta;
  $("sigma").value = sigma;
  runAll();
});
[$("beta"), $("sigma")].forEach((el) =>
  el.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") runAll();
  })
);

init().then(runAll).catch((e) => setStatus(`failed to load wasm module: ${e}`, true));
