// Outbound half of the bridge: every UI affordance lowers to the exact
// command string a terminal session accepts, so the two are interchangeable.

import type { BridgeMessage, OptionInfo } from "./protocol";

export interface Sender {
  send(text: string): void;
}

export class BridgeClient {
  seq = 0;
  commandLog: string[] = [];
  awaitingAck = 0;

  constructor(private sender: Sender) {}

  sendCommand(text: string): void {
    this.seq += 1;
    this.commandLog.push(text);
    this.awaitingAck += 1;
    this.sender.send(JSON.stringify({
      type: "command",
      payload: { text },
      seq: this.seq,
    }));
  }

  onMessage(msg: BridgeMessage): void {
    if (msg.type === "ack" && this.awaitingAck > 0) {
      this.awaitingAck -= 1;
    }
  }

  // -- affordances -----------------------------------------------------------

  /** Click an option card. Ambiguous destinations carry their origin id. */
  choose(option: OptionInfo, all: OptionInfo[]): void {
    const dupes = all.filter((o) => o.destination_name === option.destination_name);
    if (dupes.length > 1 && option.org) {
      this.sendCommand(`select state ${option.destination_name} using ${option.org}`);
    } else {
      this.sendCommand(`select state ${option.destination_name}`);
    }
  }

  /** Click a look-through target advertised by a boundary hop. */
  chooseHopTarget(name: string): void {
    this.sendCommand(`select state ${name}`);
  }

  console(text: string): void {
    this.sendCommand(text);
  }

  viewOptions(): void {
    this.sendCommand("view options");
  }

  saveInput(id: number): void {
    this.sendCommand(`save input ${id}`);
  }

  saveRule(id: number): void {
    this.sendCommand(`save rule ${id}`);
  }

  inject(component: string, message?: string): void {
    this.sendCommand(message ? `inject ${component} ${message}` : `inject ${component}`);
  }

  quit(): void {
    this.sendCommand("quit");
  }
}

export function connectWebSocket(
  url: string,
  onMessage: (msg: BridgeMessage) => void,
  onClose: () => void,
): { client: BridgeClient; socket: WebSocket } {
  const socket = new WebSocket(url);
  const client = new BridgeClient({ send: (text) => socket.send(text) });
  socket.onmessage = (ev) => {
    const msg = JSON.parse(String(ev.data)) as BridgeMessage;
    client.onMessage(msg);
    onMessage(msg);
  };
  socket.onclose = onClose;
  return { client, socket };
}
