import init, * as pm from "./pkg/phasemotion_demo.js";

const $ = (id) => document.getElementById(id);
const FRAMES = 120;
let seq = null;
let frame = 0;

function settings() {
  return { skel: $("skeleton").value, kind: $("kind").value, seed: Number($("seed").value) >>> 0 };
}

function guard(fn) {
  try {
    $("error").textContent = "";
    fn();
  } catch (e) {
    $("error").textContent = String(e.message ?? e);
  }
}

// ---- trajectory -----------------------------------------------------------

function loadTrajectory() {
  const { skel, kind, seed } = settings();
  const joints = pm.jointCount(skel);
  const names = pm.jointNames(skel);
  const sel = $("joint");
  const keep = sel.value;
  sel.replaceChildren(...names.map((n, j) => new Option(n, j)));
  if (keep && Number(keep) < joints) sel.value = keep;
  else sel.value = joints - 1;
  const pos = pm.trajectory(kind, skel, FRAMES, seed);
  let lo = [Infinity, Infinity], hi = [-Infinity, -Infinity];
  for (let i = 0; i < pos.length; i += 3) {
    for (const c of [0, 1]) {
      lo[c] = Math.min(lo[c], pos[i + c]);
      hi[c] = Math.max(hi[c], pos[i + c]);
    }
  }
  seq = { pos, joints, bones: pm.bones(skel), lo, hi };
  frame = 0;
}

function drawTrajectory() {
  const cv = $("traj"), g = cv.getContext("2d");
  g.clearRect(0, 0, cv.width, cv.height);
  if (!seq) return;
  const { pos, joints, bones, lo, hi } = seq;
  const pad = 20;
  const span = Math.max(hi[0] - lo[0], hi[1] - lo[1], 1);
  const s = Math.min(cv.width, cv.height) - 2 * pad;
  const px = (x) => pad + ((x - lo[0]) / span) * s + (cv.width - s) / 2 - pad;
  const py = (y) => cv.height - pad - ((y - lo[1]) / span) * s;
  const at = (f, j, c) => pos[(f * joints + j) * 3 + c];

  const jt = Number($("joint").value);
  g.strokeStyle = "#e0a040";
  g.beginPath();
  for (let f = 0; f < FRAMES; f++) {
    const x = px(at(f, jt, 0)), y = py(at(f, jt, 1));
    f ? g.lineTo(x, y) : g.moveTo(x, y);
  }
  g.stroke();

  g.strokeStyle = "#345";
  g.lineWidth = 2;
  for (let b = 0; b < bones.length; b += 2) {
    const [c, p] = [bones[b], bones[b + 1]];
    g.beginPath();
    g.moveTo(px(at(frame, c, 0)), py(at(frame, c, 1)));
    g.lineTo(px(at(frame, p, 0)), py(at(frame, p, 1)));
    g.stroke();
  }
  g.lineWidth = 1;
  for (let j = 0; j < joints; j++) {
    g.fillStyle = j === jt ? "#d04010" : "#345";
    g.beginPath();
    g.arc(px(at(frame, j, 0)), py(at(frame, j, 1)), j === jt ? 4 : 2.5, 0, 2 * Math.PI);
    g.fill();
  }
  g.fillStyle = "#888";
  g.fillText(`frame ${frame}`, 6, 12);
}

function tick() {
  if (seq && $("play").checked) frame = (frame + 1) % FRAMES;
  drawTrajectory();
  setTimeout(() => requestAnimationFrame(tick), 40); // 25 fps
}

// ---- affinity -------------------------------------------------------------

function heat(v) {
  // dark blue → yellow
  const t = Math.max(0, Math.min(1, v));
  return `rgb(${Math.round(255 * t)},${Math.round(40 + 200 * t)},${Math.round(120 * (1 - t))})`;
}

function drawAffinity() {
  const { skel, kind, seed } = settings();
  const horizon = Math.max(1, Math.min(25, Number($("horizon").value) | 0));
  const start = Math.max(0, Number($("start").value) | 0);
  const sharp = Number($("sharp").value);
  $("sharpv").textContent = sharp.toFixed(1);
  const a = pm.affinity(kind, skel, seed, start, horizon, sharp);
  const k = Math.round(Math.sqrt(a.length));
  const joints = k / horizon;
  let max = 0;
  for (const v of a) max = Math.max(max, v);
  const cv = $("aff"), g = cv.getContext("2d");
  g.clearRect(0, 0, cv.width, cv.height);
  const cell = cv.width / k;
  for (let q = 0; q < k; q++) {
    for (let r = 0; r < k; r++) {
      g.fillStyle = heat(Math.sqrt(a[q * k + r] / max));
      g.fillRect(r * cell, q * cell, Math.ceil(cell), Math.ceil(cell));
    }
  }
  g.strokeStyle = "rgba(255,255,255,.5)";
  for (let i = 1; i < horizon; i++) {
    const x = i * joints * cell;
    g.beginPath(); g.moveTo(x, 0); g.lineTo(x, cv.height); g.stroke();
    g.beginPath(); g.moveTo(0, x); g.lineTo(cv.width, x); g.stroke();
  }
  $("affinfo").innerHTML = `K = ${horizon} × ${joints} = ${k}<br>largest entry ${max.toFixed(4)}<br>uniform would be ${(1 / k).toFixed(4)}`;
}

// ---- baseline curves ------------------------------------------------------

function drawCurves() {
  const { skel, kind, seed } = settings();
  const count = Math.max(1, Math.min(20, Number($("count").value) | 0));
  const c = pm.baselineCurves(kind, skel, seed, count);
  const ms = pm.horizonsMs();
  const series = [
    { name: "zero velocity", color: "#3070c0", v: c.slice(0, 7) },
    { name: "constant velocity", color: "#d04010", v: c.slice(7) },
  ];
  const cv = $("curves"), g = cv.getContext("2d");
  g.clearRect(0, 0, cv.width, cv.height);
  const L = 50, R = 20, T = 20, B = 35;
  const w = cv.width - L - R, h = cv.height - T - B;
  const ymax = Math.max(1e-9, ...c) * 1.1;
  const x = (m) => L + (m / ms[ms.length - 1]) * w;
  const y = (v) => T + h - (v / ymax) * h;
  g.strokeStyle = "#999";
  g.beginPath(); g.moveTo(L, T); g.lineTo(L, T + h); g.lineTo(L + w, T + h); g.stroke();
  g.fillStyle = "#555";
  g.textAlign = "center";
  for (const m of ms) g.fillText(String(m), x(m), T + h + 14);
  g.fillText("ms", L + w / 2, T + h + 29);
  g.textAlign = "right";
  for (let i = 0; i <= 4; i++) {
    const v = (ymax * i) / 4;
    g.fillText(v.toFixed(v < 10 ? 1 : 0), L - 6, y(v) + 4);
  }
  g.textAlign = "left";
  series.forEach((s, i) => {
    g.strokeStyle = g.fillStyle = s.color;
    g.lineWidth = 2;
    g.beginPath();
    s.v.forEach((v, k) => (k ? g.lineTo(x(ms[k]), y(v)) : g.moveTo(x(ms[k]), y(v))));
    g.stroke();
    s.v.forEach((v, k) => { g.beginPath(); g.arc(x(ms[k]), y(v), 3, 0, 2 * Math.PI); g.fill(); });
    g.fillText(`${s.name}: ${s.v[s.v.length - 1].toFixed(1)} mm at 1000 ms`, L + 12, T + 14 + 16 * i);
  });
  g.lineWidth = 1;
}

// ---- wiring ---------------------------------------------------------------

function refreshAll() {
  guard(() => { loadTrajectory(); drawAffinity(); drawCurves(); });
}

await init();
for (const id of ["skeleton", "kind", "seed"]) $(id).addEventListener("change", refreshAll);
for (const id of ["start", "horizon", "sharp"]) $(id).addEventListener("input", () => guard(drawAffinity));
$("count").addEventListener("change", () => guard(drawCurves));
$("joint").addEventListener("change", drawTrajectory);
refreshAll();
tick();
