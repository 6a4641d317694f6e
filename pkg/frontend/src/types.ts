// Wire types mirrored from the API's JSON documents.

export interface Character {
  pk: string;
  name: string;
  gender?: string | null;
  age: number;
  occupation: string;
  pronouns: string;
  personality?: Record<string, string>;
  moral_values?: string[];
  decision_style?: string | null;
  public_info: string;
  secret_info: string;
  extra_public?: Record<string, string>;
  extra_private?: Record<string, string>;
}

export interface Constraints {
  arity: number;
  required_relationship?: string | null;
  age_range?: [number, number] | null;
  occupation_filter?: string[] | null;
}

export interface Scenario {
  pk: string;
  context: string;
  location?: string | null;
  time?: string | null;
  agent_goals: string[];
  constraints?: Constraints | null;
  extra_shared?: Record<string, string>;
}

export interface Relationship {
  pk: string;
  char_a: string;
  char_b: string;
  kind: string;
  backstory?: string | null;
}

export interface Action {
  actor: string;
  kind: string;
  content: string;
  to?: string | null;
}

export interface TranscriptEntry {
  turn: number;
  actor: string;
  action: Action;
}

export interface DimensionScore {
  metric: string;
  subject: string;
  score: number;
  reasoning: string;
}

export interface Episode {
  pk: string;
  scenario: string;
  cast: string[];
  transcript: TranscriptEntry[];
  termination: { reason: string; detail?: string | null };
  evaluations: DimensionScore[];
  evaluation_errors?: string[];
  tag?: string | null;
  created_at?: string;
}

export interface PolicySpec {
  kind: "scripted" | "llm";
  script?: string;
  params?: Record<string, unknown>;
  model?: string;
  endpoint?: string;
  temperature?: number;
  max_output_tokens?: number;
}

export interface Metric {
  name: string;
  description: string;
  range: [number, number];
  target: string;
}

export interface SimulationConfig {
  scenario: string;
  assignments: { character: string; policy: PolicySpec }[];
  mode: "round_robin" | "simultaneous";
  max_turns: number;
  metrics: Metric[];
  wall_clock_budget?: number | null;
  tag?: string | null;
  seed?: number | null;
}

export type ServerFrame =
  | { type: "SERVER_ACTION"; payload: TranscriptEntry }
  | { type: "SERVER_EVAL"; payload: DimensionScore }
  | { type: "ERROR"; payload: { reason: string } }
  | { type: "FINISH_SIM"; payload: { episode_pk: string; termination: { reason: string } } };

// The seven stock per-agent judging dimensions and their score ranges.
export const DEFAULT_METRICS: Metric[] = [
  { name: "Believability", description: "Natural, in-character behavior.", range: [0, 10], target: "per-agent" },
  { name: "Relationship", description: "Change in standing with the other participants.", range: [-5, 5], target: "per-agent" },
  { name: "Knowledge", description: "New, relevant information gained.", range: [0, 10], target: "per-agent" },
  { name: "Secret", description: "How well private information stayed hidden.", range: [-10, 0], target: "per-agent" },
  { name: "Social Rules", description: "Norm or rule violations during the episode.", range: [-10, 0], target: "per-agent" },
  { name: "Financial and Material Benefits", description: "Economic utility gained or lost.", range: [-5, 5], target: "per-agent" },
  { name: "Goal Completion", description: "Progress toward the private goal.", range: [0, 10], target: "per-agent" },
];
