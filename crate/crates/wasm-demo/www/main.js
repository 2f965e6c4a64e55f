import init, { classMetrics, groupSummaries, monitorSeries } from "./pkg/rastro_wasm.js";

const $ = (id) => document.getElementById(id);
const pct = (x, d = 1) => (x * 100).toFixed(d) + "%";

$("truth").value = ["petition", "petition", "petition", "ruling", "ruling", "defense", "defense", "defense", "receipt"].join("\n");
$("pred").value = ["petition", "petition", "ruling", "ruling", "ruling", "defense", "petition", "defense", "receipt"].join("\n");
$("groups").value = [
  "algorithm,accuracy",
  "MLP,0.905", "MLP,0.911", "MLP,0.899", "MLP,0.913", "MLP,0.907", "MLP,0.887",
  "LGBMClassifier,0.884", "LGBMClassifier,0.892", "LGBMClassifier,0.879", "LGBMClassifier,0.890", "LGBMClassifier,0.886", "LGBMClassifier,0.865",
  "LinearSVC,0.861", "LinearSVC,0.842", "LinearSVC,0.855", "LinearSVC,0.790", "LinearSVC,0.848",
].join("\n");
$("series").value = ["date,accuracy", "2019-08-01,0.910", "2019-09-01,0.905", "2019-10-01,0.897", "2019-11-01,0.880"].join("\n");

function guard(out, fn) {
  try {
    fn();
  } catch (e) {
    $(out).innerHTML = `<p class="error">${String(e)}</p>`;
  }
}

function table(head, rows) {
  const th = head.map((h) => `<th>${h}</th>`).join("");
  const body = rows.map((r) => "<tr>" + r.map((c) => `<td>${c}</td>`).join("") + "</tr>").join("");
  return `<table><tr>${th}</tr>${body}</table>`;
}

function runMetrics() {
  const r = JSON.parse(classMetrics($("truth").value, $("pred").value));
  const rows = r.classes.map((c) => [c.class, pct(c.precision, 2), pct(c.recall, 2), pct(c.f1, 2), c.support]);
  for (const [name, m] of [["micro", r.micro], ["macro", r.macro_avg], ["weighted", r.weighted]]) {
    rows.push([`<i>${name} avg</i>`, pct(m.precision, 2), pct(m.recall, 2), pct(m.f1, 2), r.instances]);
  }
  $("metrics-out").innerHTML = table(["class", "precision", "recall", "F1", "support"], rows) +
    `<p>accuracy ${pct(r.micro.accuracy, 2)}</p>`;
}

function drawBoxplot(groups) {
  const cv = $("boxplot"), g = cv.getContext("2d");
  g.clearRect(0, 0, cv.width, cv.height);
  const names = Object.keys(groups);
  const lo = Math.min(...names.map((n) => groups[n].min)), hi = Math.max(...names.map((n) => groups[n].max));
  const pad = (hi - lo) * 0.1 || 0.01;
  const y = (v) => 20 + (cv.height - 60) * (1 - (v - (lo - pad)) / (hi - lo + 2 * pad));
  const slot = (cv.width - 60) / names.length;
  g.font = "12px sans-serif";
  g.fillStyle = "#555";
  for (let i = 0; i <= 4; i++) {
    const v = lo - pad + ((hi - lo + 2 * pad) * i) / 4;
    g.fillText(pct(v), 2, y(v) + 4);
  }
  names.forEach((n, i) => {
    const s = groups[n], cx = 60 + slot * i + slot / 2, w = Math.min(60, slot / 3);
    g.strokeStyle = "#246";
    g.beginPath();
    g.moveTo(cx, y(s.min)); g.lineTo(cx, y(s.q1));
    g.moveTo(cx, y(s.q3)); g.lineTo(cx, y(s.max));
    g.moveTo(cx - w / 4, y(s.min)); g.lineTo(cx + w / 4, y(s.min));
    g.moveTo(cx - w / 4, y(s.max)); g.lineTo(cx + w / 4, y(s.max));
    g.stroke();
    g.fillStyle = "#cde";
    g.fillRect(cx - w / 2, y(s.q3), w, y(s.q1) - y(s.q3));
    g.strokeRect(cx - w / 2, y(s.q3), w, y(s.q1) - y(s.q3));
    g.strokeStyle = "#b00";
    g.beginPath(); g.moveTo(cx - w / 2, y(s.median)); g.lineTo(cx + w / 2, y(s.median)); g.stroke();
    g.fillStyle = "#222";
    g.fillText(n, cx - g.measureText(n).width / 2, cv.height - 22);
    g.fillText(s.display, cx - g.measureText(s.display).width / 2, cv.height - 6);
  });
}

function runGroups() {
  const groups = JSON.parse(groupSummaries($("groups").value));
  const rows = Object.entries(groups).map(([n, s]) =>
    [n, s.n, s.display, pct(s.min), pct(s.q1), pct(s.median), pct(s.q3), pct(s.max)]);
  $("groups-out").innerHTML = table(["group", "n", "mean +- std", "min", "q1", "median", "q3", "max"], rows);
  drawBoxplot(groups);
}

function drawSeries(text, report) {
  const pts = text.split("\n").map((l) => l.split(",")).filter((p) => p.length === 2 && !isNaN(parseFloat(p[1])));
  const cv = $("monitor-chart"), g = cv.getContext("2d");
  g.clearRect(0, 0, cv.width, cv.height);
  if (!pts.length) return;
  const vals = pts.map((p) => parseFloat(p[1]));
  const floor = report.baseline - report.drop_threshold;
  const lo = Math.min(floor, ...vals) - 0.01, hi = Math.max(report.baseline, ...vals) + 0.01;
  const x = (i) => 50 + ((cv.width - 80) * i) / Math.max(1, pts.length - 1);
  const y = (v) => 10 + (cv.height - 40) * (1 - (v - lo) / (hi - lo));
  g.font = "12px sans-serif";
  for (const [v, color, label] of [[report.baseline, "#070", "baseline"], [floor, "#b00", "limit"]]) {
    g.strokeStyle = color; g.setLineDash([4, 4]);
    g.beginPath(); g.moveTo(40, y(v)); g.lineTo(cv.width - 20, y(v)); g.stroke();
    g.fillStyle = color; g.fillText(`${label} ${pct(v)}`, cv.width - 120, y(v) - 4);
  }
  g.setLineDash([]); g.strokeStyle = "#246";
  g.beginPath();
  vals.forEach((v, i) => (i ? g.lineTo(x(i), y(v)) : g.moveTo(x(i), y(v))));
  g.stroke();
  vals.forEach((v, i) => {
    g.fillStyle = v < floor ? "#b00" : "#246";
    g.beginPath(); g.arc(x(i), y(v), 4, 0, 2 * Math.PI); g.fill();
    g.fillStyle = "#555"; g.fillText(pts[i][0].trim(), x(i) - 30, cv.height - 8);
  });
}

function runMonitor() {
  const text = $("series").value;
  const r = JSON.parse(monitorSeries(text, parseFloat($("baseline").value), parseFloat($("threshold").value)));
  $("monitor-out").innerHTML = `<p class="${r.status}">${r.status}</p><p>${r.message}</p>`;
  drawSeries(text, r);
}

await init();
$("metrics-run").onclick = () => guard("metrics-out", runMetrics);
$("groups-run").onclick = () => guard("groups-out", runGroups);
$("monitor-run").onclick = () => guard("monitor-out", runMonitor);
guard("metrics-out", runMetrics);
guard("groups-out", runGroups);
guard("monitor-out", runMonitor);
