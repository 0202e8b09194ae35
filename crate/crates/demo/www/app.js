import init, { rewardCurve, tightGap, weightTrajectory } from "./pkg/avgov_demo.js";

const COLORS = ["#1565c0", "#c62828", "#2e7d32", "#6a1b9a", "#ef6c00"];

function plot(canvas, series, { xMin, xMax, marks = [] }) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const ys = series.flatMap((s) => s.y).filter(Number.isFinite);
  let yMin = Math.min(...ys);
  let yMax = Math.max(...ys);
  if (yMin === yMax) { yMin -= 1; yMax += 1; }
  const sx = (x) => pad + ((x - xMin) / (xMax - xMin)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - yMin) / (yMax - yMin)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "12px sans-serif";
  ctx.fillText(yMax.toFixed(2), 2, pad + 4);
  ctx.fillText(yMin.toFixed(2), 2, h - pad);
  ctx.fillText(String(xMin), pad, h - pad + 16);
  ctx.fillText(String(xMax), w - pad - 20, h - pad + 16);
  if (yMin < 0 && yMax > 0) {
    ctx.strokeStyle = "#ddd";
    ctx.beginPath();
    ctx.moveTo(pad, sy(0));
    ctx.lineTo(w - pad, sy(0));
    ctx.stroke();
  }
  for (const m of marks) {
    ctx.strokeStyle = "#bbb";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(sx(m), pad);
    ctx.lineTo(sx(m), h - pad);
    ctx.stroke();
    ctx.setLineDash([]);
  }
  series.forEach((s, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(s.y[i])) : ctx.moveTo(sx(x), sy(s.y[i]))));
    ctx.stroke();
  });
}

function guard(target, f) {
  try {
    f();
  } catch (e) {
    target.innerHTML = `<span class="err">${e}</span>`;
  }
}

const num = (id) => Number(document.getElementById(id).value);

function drawCurve() {
  const info = document.getElementById("curve-info");
  info.textContent = "";
  guard(info, () => {
    const t = num("t");
    const c = JSON.parse(rewardCurve(t, num("eps"), num("ap"), 201));
    info.textContent = `a = ${c.a.toFixed(4)}, s = ${c.s.toFixed(4)}`;
    plot(document.getElementById("curve"), [
      { x: c.p, y: c.approve },
      { x: c.p, y: c.reject },
    ], { xMin: 0, xMax: 1, marks: [t] });
  });
}

function drawGap() {
  const slacks = Array.from({ length: 50 }, (_, i) => 0.01 + i * 0.0196);
  const pts = JSON.parse(tightGap(new Float64Array(slacks)));
  plot(document.getElementById("gap"), [
    { x: pts.map((p) => p.slack), y: pts.map((p) => p.ratio) },
    { x: pts.map((p) => p.slack), y: pts.map(() => 2) },
  ], { xMin: 0, xMax: 1 });
}

function drawTrajectory() {
  const acc = document.getElementById("acc").value.split(",").map(Number);
  const canvas = document.getElementById("traj");
  const info = document.getElementById("traj-info");
  info.textContent = "";
  guard(info, () => {
    const t = JSON.parse(weightTrajectory(new Float64Array(acc), num("zeta"), num("rounds"), BigInt(num("seed"))));
    const rounds = t.weights.map((_, r) => r);
    const series = acc.map((_, i) => ({ x: rounds, y: t.weights.map((w) => w[i]) }));
    info.textContent = `${t.revealed_rounds} rounds revealed a winner's quality`;
    plot(canvas, series, { xMin: 0, xMax: rounds.length - 1 });
  });
}

await init();
document.getElementById("curve-go").onclick = drawCurve;
document.getElementById("gap-go").onclick = drawGap;
document.getElementById("traj-go").onclick = drawTrajectory;
drawCurve();
drawGap();
drawTrajectory();
