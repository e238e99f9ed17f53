// Wire types mirroring the service's JSON API.

export interface PatientRow {
  subject_id: number;
  hadm_id: number;
  gender: string;
  age: number;
  ethnicity: string;
  religion: string;
  marital_status: string;
  admission_type: string;
  admission_location: string;
  discharge_location: string;
  insurance: string;
  duration_days: number;
}

export interface PersonalityTraits {
  openness: boolean;
  conscientiousness: boolean;
  extraversion: boolean;
  agreeableness: boolean;
  neuroticism: boolean;
}

export interface PersonalityInfo extends PersonalityTraits {
  index: number;
  descriptors: string[];
}

export interface SessionDescriptor {
  session_id: string;
  subject_id: number;
  hadm_id: number;
  personality: PersonalityInfo;
}

export interface SchemaSubset {
  nodes: string[];
  relationships: string[];
}

export interface Trace {
  abstraction: string | null;
  schema_subset: SchemaSubset | null;
  final_query: string | null;
  iterations_used: number;
}

export interface MessageResponse {
  utterance: string;
  fallback: boolean;
  trace: Trace | null;
}

export interface HistoryTurn {
  question: string;
  patient_response: string;
  fallback: boolean;
  graph_query: string | null;
  result_columns: string[] | null;
  result_rows: string[][] | null;
  checker_iterations: number;
}

export interface HistoryResponse {
  summary: string;
  turns: HistoryTurn[];
}

export interface ApiErrorBody {
  code: string;
  detail: string;
  stage?: string | null;
}

export const TRAIT_NAMES: (keyof PersonalityTraits)[] = [
  "openness",
  "conscientiousness",
  "extraversion",
  "agreeableness",
  "neuroticism",
];
