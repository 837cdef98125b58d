import init, { attractor, compare, identify } from "./pkg/l0lms_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function plot(canvas, series, { stems = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);

  let xmin = Infinity, xmax = -Infinity, ymin = Infinity, ymax = -Infinity;
  for (const s of series) {
    for (let i = 0; i < s.y.length; i++) {
      const x = s.x ? s.x[i] : i, y = s.y[i];
      if (!Number.isFinite(y)) continue;
      xmin = Math.min(xmin, x); xmax = Math.max(xmax, x);
      ymin = Math.min(ymin, y); ymax = Math.max(ymax, y);
    }
  }
  if (ymin === ymax) { ymin -= 1; ymax += 1; }
  const sx = (x) => pad + (x - xmin) / (xmax - xmin) * (w - 2 * pad);
  const sy = (y) => h - pad - (y - ymin) / (ymax - ymin) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillText(ymax.toPrecision(3), 2, pad + 4);
  ctx.fillText(ymin.toPrecision(3), 2, h - pad);
  ctx.fillText(String(+xmin.toPrecision(3)), pad, h - pad + 14);
  ctx.fillText(String(+xmax.toPrecision(3)), w - pad - 30, h - pad + 14);
  if (ymin < 0 && ymax > 0) {
    ctx.beginPath(); ctx.moveTo(pad, sy(0)); ctx.lineTo(w - pad, sy(0)); ctx.stroke();
  }

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.width || 1.5;
    ctx.beginPath();
    let pen = false;
    for (let i = 0; i < s.y.length; i++) {
      const x = s.x ? s.x[i] : i, y = s.y[i];
      if (!Number.isFinite(y)) { pen = false; continue; }
      if (stems) {
        const px = sx(x) + (s.offset || 0);
        ctx.moveTo(px, sy(0)); ctx.lineTo(px, sy(y));
      } else if (pen) {
        ctx.lineTo(sx(x), sy(y));
      } else {
        ctx.moveTo(sx(x), sy(y)); pen = true;
      }
    }
    ctx.stroke();
  }
}

function guarded(out, fn) {
  return () => {
    if (out) { out.textContent = ""; out.classList.remove("err"); }
    try {
      fn();
    } catch (e) {
      if (out) { out.textContent = String(e.message || e); out.classList.add("err"); }
      else alert(e.message || e);
    }
  };
}

const fmtReach = (r) => (r === undefined ? "not reached" : r);

function runAttractor() {
  const c = attractor(num("a-beta"), 801);
  plot($("a-plot"), [
    { x: c.x, y: c.taylor, color: "#1f77b4" },
    { x: c.x, y: c.exact, color: "#d62728" },
  ]);
}

function runCurves() {
  const r = compare(num("c-mu"), num("c-kappa"), num("c-nl"), num("c-runs"), num("c-iter"), BigInt(num("c-seed")));
  plot($("c-plot"), [
    { y: r.lms_db, color: "#7f7f7f" },
    { y: r.l0_db, color: "#1f77b4" },
  ]);
  $("c-out").textContent =
    `LMS: ${r.lms_level.toFixed(2)} dB, steady at ${fmtReach(r.lms_reach)}   ` +
    `l0-LMS: ${r.l0_level.toFixed(2)} dB, steady at ${fmtReach(r.l0_reach)}`;
}

function runIdentify() {
  const r = identify(num("i-mu"), num("i-kappa"), num("i-nl"), num("i-iter"), BigInt(num("i-seed")));
  plot($("i-plot"), [
    { y: r.truth, color: "#222", width: 3 },
    { y: r.lms, color: "#7f7f7f", offset: 2 },
    { y: r.l0, color: "#1f77b4", offset: -2 },
  ], { stems: true });
  $("i-out").textContent =
    `final MSD  LMS: ${r.lms_msd_db.toFixed(2)} dB   l0-LMS: ${r.l0_msd_db.toFixed(2)} dB`;
}

await init();
const actions = [
  ["a-run", guarded(null, runAttractor)],
  ["c-run", guarded($("c-out"), runCurves)],
  ["i-run", guarded($("i-out"), runIdentify)],
];
for (const [id, fn] of actions) {
  $(id).addEventListener("click", fn);
  fn();
}
