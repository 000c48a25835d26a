import init, { gate_surface, gate_point, contraction_trajectory, SineDemo } from "./pkg/qssm_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);
const GRID = 64;

function showValues() {
  for (const out of document.querySelectorAll("output[for]")) {
    out.textContent = $(out.htmlFor).value;
  }
}

function drawSurface() {
  const values = gate_surface(num("phi1"), num("phi2"), num("w1"), num("w2"), num("bg"), GRID);
  const canvas = $("surface");
  const ctx = canvas.getContext("2d");
  const cell = canvas.width / GRID;
  for (let i = 0; i < GRID; i++) {
    for (let j = 0; j < GRID; j++) {
      const t = (values[i * GRID + j] - 0.05) / 0.9;
      const c = Math.round(255 * t);
      ctx.fillStyle = `rgb(${c},${Math.round(80 + 120 * t)},${255 - c})`;
      // θ₁ grows downwards, θ₂ to the right
      ctx.fillRect(j * cell, i * cell, cell + 1, cell + 1);
    }
  }
}

function inspect(theta1, theta2) {
  const p = gate_point(theta1, num("phi1"), theta2, num("phi2"), num("w1"), num("w2"), num("bg"));
  $("point").textContent =
    `θ₁ ${theta1.toFixed(3)}  θ₂ ${theta2.toFixed(3)}\n` +
    `g ${p.g.toFixed(6)}${p.clipped ? " (clamped)" : ""}\n` +
    `z₁ ${p.z1.toFixed(6)}  z₂ ${p.z2.toFixed(6)}\n` +
    `∂g/∂θ₁ analytic ${p.dtheta1_analytic.toExponential(6)}\n` +
    `∂g/∂θ₁ shift    ${p.dtheta1_shift.toExponential(6)}\n` +
    `bound |w₁|/4    ${p.lipschitz_bound.toFixed(6)}`;
  p.free();
}

function plotLines(canvas, series, { log = false } = {}) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const f = log ? (v) => Math.log10(Math.max(v, 1e-300)) : (v) => v;
  const all = series.flatMap((s) => s.points.map(([, y]) => f(y)));
  const xs = series.flatMap((s) => s.points.map(([x]) => x));
  const [ymin, ymax] = [Math.min(...all), Math.max(...all)];
  const [xmin, xmax] = [Math.min(...xs), Math.max(...xs)];
  const pad = 10;
  const sx = (x) => pad + ((x - xmin) / (xmax - xmin || 1)) * (canvas.width - 2 * pad);
  const sy = (y) => canvas.height - pad - ((f(y) - ymin) / (ymax - ymin || 1)) * (canvas.height - 2 * pad);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    s.points.forEach(([x, y], k) => (k ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function drawContraction() {
  const g = num("g");
  const steps = parseInt($("steps").value, 10);
  const v = contraction_trajectory(g, steps, 16, 7n);
  const measured = [], bound = [];
  let worst = 0;
  for (let t = 0; t <= steps; t++) {
    measured.push([t, v[2 * t]]);
    bound.push([t, v[2 * t + 1]]);
    worst = Math.max(worst, Math.abs(v[2 * t] - v[2 * t + 1]) / v[2 * t + 1]);
  }
  plotLines($("contraction"), [
    { points: bound, color: "#e69f00", dash: [4, 4] },
    { points: measured, color: "#0072b2" },
  ], { log: true });
  $("contraction-note").textContent =
    `log scale; dashed is (1−g)^t·‖Δh₀‖\nmax relative deviation ${worst.toExponential(2)}`;
}

let demo = null;
let running = false;

function resetDemo() {
  if (demo) demo.free();
  demo = new SineDemo(num("period"), $("gate").value, BigInt($("seed").value));
  $("window").max = demo.test_windows() - 1;
  $("train-log").textContent = `naive last-value test MSE ${demo.naive_test_mse().toExponential(3)}\n`;
  drawForecast();
}

function drawForecast() {
  const w = 32, h = 8;
  const v = demo.forecast(parseInt($("window").value, 10));
  const hist = Array.from({ length: w }, (_, t) => [t, v[t]]);
  const last = hist[w - 1];
  const pred = [last, ...Array.from({ length: h }, (_, t) => [w + t, v[w + t]])];
  const truth = [last, ...Array.from({ length: h }, (_, t) => [w + t, v[w + h + t]])];
  plotLines($("forecast"), [
    { points: hist, color: "#888" },
    { points: truth, color: "#e69f00" },
    { points: pred, color: "#0072b2" },
  ]);
}

function trainSome(n) {
  const rows = demo.train_epochs(n);
  for (let i = 0; i < rows.length; i += 5) {
    const [epoch, tr, val, lr, g] = rows.slice(i, i + 5);
    $("train-log").textContent +=
      `epoch ${epoch}  train ${tr.toExponential(2)}  val ${val.toExponential(2)}  lr ${lr.toExponential(1)}  g ${g.toFixed(3)}\n`;
  }
  drawForecast();
  if (demo.done()) {
    $("train-log").textContent += `done; test MSE ${demo.test_mse().toExponential(3)}\n`;
  }
}

async function runToEnd() {
  if (running) return;
  running = true;
  while (!demo.done()) {
    trainSome(1);
    await new Promise((r) => setTimeout(r, 0));
  }
  running = false;
}

async function main() {
  await init();
  $("status").textContent = "";
  for (const id of ["phi1", "phi2", "w1", "w2", "bg"]) {
    $(id).addEventListener("input", () => { showValues(); drawSurface(); });
  }
  for (const id of ["g", "steps"]) {
    $(id).addEventListener("input", () => { showValues(); drawContraction(); });
  }
  $("surface").addEventListener("click", (e) => {
    const r = e.target.getBoundingClientRect();
    const theta2 = -Math.PI + (2 * Math.PI * (e.clientX - r.left)) / r.width;
    const theta1 = -Math.PI + (2 * Math.PI * (e.clientY - r.top)) / r.height;
    inspect(theta1, theta2);
  });
  $("reset").addEventListener("click", resetDemo);
  $("train").addEventListener("click", () => trainSome(5));
  $("run").addEventListener("click", runToEnd);
  $("window").addEventListener("input", drawForecast);
  showValues();
  drawSurface();
  inspect(0.5, -1.0);
  drawContraction();
  resetDemo();
}

main().catch((e) => { $("status").textContent = `failed to start: ${e}`; });
