import init, { power_vs_rate, rate_vs_budget, outage_check } from "./pkg/swipt_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = { bti: "#1f77b4", sproc: "#2ca02c", ldi: "#d62728", nonrobust: "#9467bd", mrt: "#8c564b" };

function scenario() {
  return [$("preset").value, Number($("seed").value) >>> 0, Number($("eps").value), $("methods").value];
}

function status(text, error = false) {
  $("status").textContent = text;
  $("status").className = error ? "err" : "";
}

// Solves block the main thread; yield once so the status line repaints first.
function busy(label, work) {
  status(label + " ...");
  setTimeout(() => {
    const t0 = performance.now();
    try {
      work();
      status(`${label}: ${((performance.now() - t0) / 1000).toFixed(2)} s`);
    } catch (e) {
      status(String(e.message ?? e), true);
    }
  }, 20);
}

function plot(sweep, xlabel, ylabel) {
  const cv = $("plot");
  const g = cv.getContext("2d");
  const W = cv.width, H = cv.height, L = 70, R = 130, T = 20, B = 50;
  g.clearRect(0, 0, W, H);
  const ys = sweep.curves.flatMap((c) => c.values.filter((v) => v !== null));
  if (ys.length === 0) {
    g.fillText("no feasible points", W / 2 - 40, H / 2);
    return;
  }
  const x0 = Math.min(...sweep.x), x1 = Math.max(...sweep.x);
  let y0 = Math.min(...ys), y1 = Math.max(...ys);
  if (y1 - y0 < 1e-9) { y0 -= 1; y1 += 1; }
  const px = (x) => L + (x1 === x0 ? 0.5 : (x - x0) / (x1 - x0)) * (W - L - R);
  const py = (y) => H - B - ((y - y0) / (y1 - y0)) * (H - T - B);

  g.strokeStyle = "#888";
  g.fillStyle = "#000";
  g.font = "12px sans-serif";
  g.beginPath();
  g.moveTo(L, T); g.lineTo(L, H - B); g.lineTo(W - R, H - B);
  g.stroke();
  for (let k = 0; k <= 4; k++) {
    const y = y0 + ((y1 - y0) * k) / 4;
    g.fillText(y.toFixed(2), 8, py(y) + 4);
  }
  for (const x of sweep.x) g.fillText(String(+x.toFixed(3)), px(x) - 8, H - B + 16);
  g.fillText(xlabel, (W - R) / 2, H - 12);
  g.save();
  g.translate(14, T + 40);
  g.rotate(-Math.PI / 2);
  g.fillText(ylabel, -60, 0);
  g.restore();

  sweep.curves.forEach((c, i) => {
    const col = COLORS[c.method] ?? "#333";
    g.strokeStyle = g.fillStyle = col;
    g.lineWidth = 2;
    g.beginPath();
    let open = false;
    c.values.forEach((v, k) => {
      if (v === null) { open = false; return; }
      const X = px(sweep.x[k]), Y = py(v);
      open ? g.lineTo(X, Y) : g.moveTo(X, Y);
      open = true;
      g.fillRect(X - 3, Y - 3, 6, 6);
    });
    g.stroke();
    g.fillText(c.method, W - R + 14, T + 16 + 18 * i);
  });
  g.lineWidth = 1;
}

function table(rows, cols) {
  const fmt = (v) => (v === null || v === undefined ? "–" : typeof v === "number" ? +v.toPrecision(4) : String(v));
  const head = cols.map(([, h]) => `<th>${h}</th>`).join("");
  const body = rows.map((r) => `<tr>${cols.map(([k]) => `<td>${fmt(typeof k === "function" ? k(r) : r[k])}</td>`).join("")}</tr>`).join("");
  $("table").innerHTML = `<table><tr>${head}</tr>${body}</table>`;
}

function sweepTable(sweep, xname) {
  const rows = sweep.x.map((x, k) => Object.fromEntries([[xname, x], ...sweep.curves.map((c) => [c.method, c.values[k]])]));
  table(rows, [[xname, xname], ...sweep.curves.map((c) => [c.method, c.method])]);
}

$("power").onclick = () =>
  busy("power vs rate", () => {
    const s = JSON.parse(power_vs_rate(...scenario(), Number($("rlo").value), Number($("rhi").value), Number($("rpts").value)));
    plot(s, "secrecy rate target R (bit/s/Hz)", "transmit power (dBW)");
    sweepTable(s, "R");
  });

$("srm").onclick = () =>
  busy("rate vs budget", () => {
    const s = JSON.parse(rate_vs_budget(...scenario(), Number($("plo").value), Number($("phi").value), Number($("ppts").value)));
    plot(s, "power budget (dB)", "max secrecy rate (bit/s/Hz)");
    sweepTable(s, "Pt_dB");
  });

$("outage").onclick = () =>
  busy("outage", () => {
    const rows = JSON.parse(outage_check(...scenario(), Number($("trials").value)));
    $("plot").getContext("2d").clearRect(0, 0, $("plot").width, $("plot").height);
    table(rows, [
      ["method", "method"],
      ["power", "power (W)"],
      ["rank_ratio", "rank ratio"],
      ["secrecy_outage", "secrecy outage"],
      ["secrecy_half_width", "± 95%"],
      [(r) => (r.eh_outage.length ? Math.max(...r.eh_outage) : null), "worst EH outage"],
      ["p", "p"],
      ["q", "q"],
    ]);
  });

await init();
status("ready");
