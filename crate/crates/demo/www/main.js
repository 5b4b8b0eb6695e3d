import init, { quantizer_view, precode_realization, sum_rate_curve } from "./pkg/qpl_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function guarded(out, f) {
  try {
    f();
  } catch (e) {
    out.innerHTML = `<span class="error">${e.message ?? e}</span>`;
  }
}

function drawQuantizer(v, w) {
  const c = $("qCanvas");
  const g = c.getContext("2d");
  const edge = Math.max(...v.labels.map(Math.abs), Math.abs(w[0]), Math.abs(w[1])) * 1.25;
  const px = (x) => ((x + edge) / (2 * edge)) * c.width;
  const py = (y) => c.height - ((y + edge) / (2 * edge)) * c.height;
  g.clearRect(0, 0, c.width, c.height);
  g.strokeStyle = "#ddd";
  for (const t of v.thresholds) {
    g.beginPath(); g.moveTo(px(t), 0); g.lineTo(px(t), c.height); g.stroke();
    g.beginPath(); g.moveTo(0, py(t)); g.lineTo(c.width, py(t)); g.stroke();
  }
  const dot = (x, y, r, color) => {
    g.fillStyle = color;
    g.beginPath(); g.arc(px(x), py(y), r, 0, 2 * Math.PI); g.fill();
  };
  for (const a of v.labels) for (const b of v.labels) dot(a, b, 3, "#555");
  for (const [a, b] of v.candidates) dot(a, b, 6, "#2a7");
  dot(v.quantized[0], v.quantized[1], 8, "#27c");
  dot(w[0], w[1], 5, "#d22");
}

$("qGo").onclick = () => guarded($("qOut"), () => {
  const w = [num("qRe"), num("qIm")];
  const v = JSON.parse(quantizer_view(num("qLevels"), num("qVar"), w[0], w[1]));
  drawQuantizer(v, w);
  $("qOut").textContent =
    `step ${v.step.toFixed(4)}, ${v.bits} bits per real dimension\n` +
    `nearest point (blue): ${v.quantized.map((x) => x.toFixed(4)).join(", ")}\n` +
    `candidates (green): ${v.candidates.map((c) => `(${c.map((x) => x.toFixed(3)).join(", ")})`).join(" ")}`;
});

$("pGo").onclick = () => guarded($("pOut"), () => {
  const t0 = performance.now();
  const v = JSON.parse(precode_realization(num("pM"), num("pK"), num("pL"), num("pSnr"), num("pSeed")));
  const ms = performance.now() - t0;
  const rows = v.schemes.map((s) =>
    `<tr><td>${s.scheme}</td><td>${s.sum_rate.toFixed(3)}</td><td>${s.mse.toExponential(3)}</td>` +
    `<td>${s.transmit_power.toFixed(4)}</td><td>${s.sphere_nodes ?? ""}</td></tr>`).join("");
  $("pOut").innerHTML =
    `<table><tr><th>scheme</th><th>sum rate</th><th>MSE</th><th>power</th><th>sphere nodes</th></tr>${rows}</table>` +
    `<p>step ${v.step.toFixed(4)}, all schemes in ${ms.toFixed(0)} ms</p>`;
});

$("cGo").onclick = () => guarded($("cOut"), () => {
  $("cOut").textContent = sum_rate_curve($("cCfg").value);
});

await init();
$("qGo").click();
