export interface Box {
  class_id: number;
  cx: number;
  cy: number;
  w: number;
  h: number;
}

export type ItemState = "pending" | "accepted" | "edited" | "rejected";

export type DecisionAction = "accept" | "reject" | "edit" | "reset";

export interface ReviewItem {
  item_id: string;
  image_id: string;
  proposed: Box;
  confidence: number;
  state: ItemState;
  final_box: Box | null;
}

export interface QueueSummary {
  queue_id: string;
  source_iteration: string;
  total: number;
  pending: number;
  accepted: number;
  edited: number;
  rejected: number;
}

export interface ItemPage {
  items: ReviewItem[];
  total: number;
}

export interface ExportReport {
  exported_images: number;
  negative_images: number;
  boxes_exported: number;
  rejected_items: number;
  skipped_pending_items: number;
  edit_drift: Record<string, number>;
}
