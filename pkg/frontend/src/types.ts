// Field manifests mirror the service's canonical column order exactly;
// mountApp cross-checks them against GET /v1/model at startup.

export const STEP1_FIELDS = [
  "age",
  "gender",
  "cough",
  "sputum",
  "bloody_sputum",
  "fever",
  "shaking",
  "smoking",
  "joint_pain",
  "edema",
  "asthma",
  "diabetes",
  "cyanosis",
  "weight_loss",
  "weakness",
  "lung_sound_abnormal",
  "dyspnea",
  "orthopnea",
] as const;

export const STEP2_FIELDS = [
  "wbc",
  "hemoglobin",
  "hematocrit",
  "neutrophil",
  "lymphocyte",
  "mcv",
  "crp",
  "esr",
  "lung_abnormalities_cxr",
  "white_spots_cxr",
] as const;

export type Step1Field = (typeof STEP1_FIELDS)[number];
export type Step2Field = (typeof STEP2_FIELDS)[number];

// the two CXR keywords are 0/1 toggles; the other step-2 fields are lab numbers
export const STEP2_BINARY_FIELDS: readonly Step2Field[] = [
  "lung_abnormalities_cxr",
  "white_spots_cxr",
];

export type DiagnosisLabel = "TB" | "P";

export interface ModelInfo {
  kind: string;
  seed: number;
  folds: number;
  epsilon: number;
  route_threshold: number;
  step1_fields: string[];
  step2_fields: string[];
  layer_sizes: number[];
}

export interface Step1Response {
  label: DiagnosisLabel | "undetermined";
  cs: number;
  routed: boolean;
  meta2: number[];
  session_id: string;
}

export interface Step2Response {
  final_label: DiagnosisLabel;
  votes: DiagnosisLabel[];
  probs?: number[];
  warning?: string;
}

export interface ApiError {
  status: number;
  message: string;
  fields: string[];
}
