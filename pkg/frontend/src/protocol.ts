// Message shapes of the newline-delimited JSON bridge protocol.

export type MessageType =
  | "model" | "context" | "options" | "step" | "event" | "ack" | "error";

export interface BridgeMessage {
  type: MessageType;
  payload: any;
  seq: number;
}

export interface StateNode {
  id: string;
  name: string;
  kind: "basic" | "composite" | "initial" | "choice" | "junction" | "entry_point" | "exit_point";
  parent: string | null;
  added: boolean;
  modified: boolean;
}

export interface TransitionEdge {
  id: string;
  src: string;
  des: string;
  trig: string[];
  guard: string | null;
  added: boolean;
  modified: boolean;
}

export interface ComponentGraph {
  name: string;
  states: StateNode[];
  transitions: TransitionEdge[];
  org: Record<string, string>;
  dec_points: Record<string, string>;
}

export interface ModelPayload {
  system: string;
  components: ComponentGraph[];
}

export interface OptionInfo {
  index: number;
  transition: string;
  destination: string;
  destination_name: string;
  org: string | null;
  hop_targets: string[];
}

export interface ContextPayload {
  component: string;
  state: string;
  state_id: string;
  dec_p: string;
  last_message: string | null;
  options: OptionInfo[];
}

export interface StepPayload {
  step: number;
  component: string;
  rule: number;
  from: string;
  to: string;
  actions: string[];
  emissions: [string, string, unknown[]][];
  vtime: number;
  message?: string;
  selection?: number;
}

export interface AckPayload {
  lines: string[];
  selection: number | null;
  quit: boolean;
  error: string | null;
}

export function parseMessage(line: string): BridgeMessage {
  return JSON.parse(line) as BridgeMessage;
}
