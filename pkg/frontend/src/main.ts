// Browser entry point: one page with the HSM view, the option cards and the
// DBG console, driven exclusively by bridge messages over a websocket.

import { BridgeClient, connectWebSocket } from "./client";
import { layoutComponent } from "./layout";
import type { BridgeMessage, OptionInfo } from "./protocol";
import { renderComponentSvg } from "./render";
import { ViewModel, initialViewModel, reduce } from "./viewmodel";

let vm: ViewModel = initialViewModel();
let client: BridgeClient | null = null;
let focused: string | null = null;

const $ = (id: string) => document.getElementById(id) as HTMLElement;

function bridgeUrl(): string {
  const params = new URLSearchParams(location.search);
  const explicit = params.get("bridge");
  if (explicit) return explicit;
  const runId = params.get("run");
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/runs/${runId}/bridge`;
}

function drawGraphs(): void {
  const host = $("graphs");
  host.innerHTML = "";
  if (!vm.model) return;
  for (const graph of vm.model.components) {
    const wrap = document.createElement("section");
    wrap.className = "graph" + (focused === graph.name ? " focused" : "");
    const title = document.createElement("h3");
    title.textContent = graph.name + (vm.current[graph.name] ? ` @ ${vm.current[graph.name]}` : "");
    title.onclick = () => { focused = graph.name; draw(); };
    wrap.appendChild(title);
    const svgHost = document.createElement("div");
    svgHost.innerHTML = renderComponentSvg(
      graph, layoutComponent(graph), vm.current[graph.name], vm.lastEdge[graph.name]);
    wrap.appendChild(svgHost);
    host.appendChild(wrap);
  }
}

function drawOptions(): void {
  const host = $("options");
  host.innerHTML = "";
  if (!vm.pending) {
    host.textContent = vm.quiescent
      ? "system is quiescent — inject a message from the console"
      : "running…";
    return;
  }
  const ctx = vm.pending;
  focused = ctx.component;
  const head = document.createElement("p");
  head.textContent = `${ctx.component} stopped at ${ctx.dec_p} (from ${ctx.state}`
    + (ctx.last_message ? ` on ${ctx.last_message}` : "") + ")";
  host.appendChild(head);
  const all = vm.pendingOptions;
  for (const option of all) {
    host.appendChild(optionButton(option, all));
    for (const hop of option.hop_targets) {
      const b = document.createElement("button");
      b.className = "option hop";
      b.textContent = `${hop} (through ${option.destination_name})`;
      b.onclick = () => client?.chooseHopTarget(hop);
      host.appendChild(b);
    }
  }
}

function optionButton(option: OptionInfo, all: OptionInfo[]): HTMLButtonElement {
  const b = document.createElement("button");
  b.className = "option";
  b.textContent = option.destination_name + (option.org ? ` (using ${option.org})` : "");
  b.onclick = () => client?.choose(option, all);
  return b;
}

function drawConsole(): void {
  const host = $("transcript");
  host.innerHTML = "";
  for (const entry of vm.transcript.slice(-200)) {
    const line = document.createElement("div");
    line.className = `line ${entry.kind}`;
    line.textContent = (entry.kind === "sent" ? "pmx> " : "") + entry.text;
    host.appendChild(line);
  }
  host.scrollTop = host.scrollHeight;
}

function drawHistory(): void {
  const host = $("history");
  host.innerHTML = "";
  for (const d of vm.decisions) {
    const row = document.createElement("div");
    row.className = "decision";
    const label = document.createElement("span");
    label.textContent = `${d.id}) ${d.component}.${d.state}`
      + (d.message ? ` on ${d.message}` : "") + ` -> ${d.selection}`;
    row.appendChild(label);
    const saveInput = document.createElement("button");
    saveInput.textContent = "save input";
    saveInput.onclick = () => client?.saveInput(d.id);
    row.appendChild(saveInput);
    const saveRule = document.createElement("button");
    saveRule.textContent = "save rule";
    saveRule.onclick = () => client?.saveRule(d.id);
    row.appendChild(saveRule);
    host.appendChild(row);
  }
}

function drawBanner(): void {
  const banner = $("banner");
  if (!vm.connected) {
    banner.textContent = "disconnected — retrying…";
    banner.style.display = "block";
  } else if (vm.halted) {
    banner.textContent = `run halted: ${vm.halted}`;
    banner.style.display = "block";
  } else {
    banner.style.display = "none";
  }
}

function draw(): void {
  drawGraphs();
  drawOptions();
  drawConsole();
  drawHistory();
  drawBanner();
}

function onMessage(msg: BridgeMessage): void {
  vm = reduce(vm, msg);
  draw();
}

function connect(): void {
  const { client: c } = connectWebSocket(bridgeUrl(), onMessage, () => {
    vm = { ...vm, connected: false };
    draw();
    setTimeout(connect, 1500);  // state is preserved; reconnect resumes
  });
  client = c;
}

function wireConsole(): void {
  const form = $("console-form") as HTMLFormElement;
  const input = $("console-input") as HTMLInputElement;
  form.onsubmit = (ev) => {
    ev.preventDefault();
    const text = input.value.trim();
    if (!text || !client) return;
    vm = { ...vm, transcript: [...vm.transcript, { kind: "sent", text }] };
    client.console(text);
    input.value = "";
    draw();
  };
}

if (typeof document !== "undefined" && document.getElementById("graphs")) {
  wireConsole();
  connect();
}
