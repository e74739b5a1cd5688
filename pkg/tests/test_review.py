import pytest

from boxforge.errors import ReviewError
from boxforge.evaluation import Detection, write_detections_jsonl
from boxforge.labels import NormalizedBox, serialize_label_file
from boxforge.review import (
    append_journal,
    decide,
    export_accepted,
    import_detections,
    load_queue,
    queue_from_detections,
    save_queue,
)

from .conftest import write_png


def det(image_id, conf, cx=0.5, cy=0.5, w=0.2, h=0.2):
    return Detection(image_id, NormalizedBox(0, cx, cy, w, h), conf)


class TestImport:
    def test_pass_through_at_zero_threshold(self):
        result = queue_from_detections([det("a", 0.9), det("b", 0.1), det("a", 0.5)], 0.0)
        assert len(result.queue) == 3
        assert result.dropped_below_threshold == 0

    def test_threshold_filters_and_reports(self):
        result = queue_from_detections([det("a", 0.9), det("a", 0.4)], 0.5)
        assert len(result.queue) == 1
        assert result.dropped_below_threshold == 1

    def test_empty_file_empty_queue(self, tmp_path):
        p = tmp_path / "dets.jsonl"
        p.write_text("")
        result = import_detections(p)
        assert len(result.queue) == 0

    def test_ordering_by_image_then_confidence(self):
        result = queue_from_detections(
            [det("b", 0.9), det("a", 0.5), det("a", 0.8)], 0.0
        )
        keys = [(i.image_id, i.confidence) for i in result.queue.items]
        assert keys == [("a", 0.8), ("a", 0.5), ("b", 0.9)]

    def test_item_ids_sequential_and_stable(self):
        result = queue_from_detections([det("a", 0.9), det("b", 0.8)], 0.0)
        assert [i.item_id for i in result.queue.items] == ["item-0000", "item-0001"]


class TestDecide:
    def make_queue(self):
        return queue_from_detections([det("a", 0.9), det("a", 0.8), det("b", 0.7)], 0.0).queue

    def test_accept(self):
        q = self.make_queue()
        item = decide(q, "item-0000", "accept")
        assert item.state == "accepted"
        assert item.final_box == item.proposed

    def test_reject(self):
        q = self.make_queue()
        item = decide(q, "item-0000", "reject")
        assert item.state == "rejected"
        assert item.final_box is None

    def test_edit(self):
        q = self.make_queue()
        box = NormalizedBox(0, 0.5, 0.5, 0.3, 0.3)
        item = decide(q, "item-0000", "edit", box)
        assert item.state == "edited"
        assert item.final_box == box

    def test_edit_identical_to_proposal_collapses_to_accept(self):
        q = self.make_queue()
        item = decide(q, "item-0000", "edit", q.item("item-0000").proposed)
        assert item.state == "accepted"

    def test_revisable(self):
        q = self.make_queue()
        decide(q, "item-0000", "reject")
        item = decide(q, "item-0000", "accept")
        assert item.state == "accepted"

    def test_reset_returns_to_pending(self):
        q = self.make_queue()
        decide(q, "item-0000", "reject")
        item = decide(q, "item-0000", "reset")
        assert item.state == "pending"
        assert item.final_box is None

    def test_unknown_item(self):
        with pytest.raises(ReviewError):
            decide(self.make_queue(), "nope", "accept")

    def test_edit_requires_box(self):
        with pytest.raises(ReviewError):
            decide(self.make_queue(), "item-0000", "edit")

    def test_unknown_action(self):
        with pytest.raises(ReviewError):
            decide(self.make_queue(), "item-0000", "approve")


class TestJournalReplay:
    def test_replay_reconstructs_state(self, tmp_path, rng):
        dets = [det(f"im{i % 4}", round(0.3 + 0.1 * (i % 7), 2)) for i in range(12)]
        base = queue_from_detections(dets, 0.0).queue
        queue_path = tmp_path / "queue.json"
        journal_path = tmp_path / "journal.jsonl"
        save_queue(base, queue_path)

        live = load_queue(queue_path)
        actions = ["accept", "reject", "edit", "reset"]
        for _ in range(60):
            item = live.items[rng.randrange(len(live.items))]
            action = actions[rng.randrange(len(actions))]
            box = None
            if action == "edit":
                box = NormalizedBox(0, 0.5, 0.5, round(rng.uniform(0.1, 0.4), 3), 0.25)
            decide(live, item.item_id, action, box)
            append_journal(journal_path, item.item_id, action, box)

        replayed = load_queue(queue_path, journal_path)
        assert replayed.items == live.items

    def test_missing_journal_means_pristine_queue(self, tmp_path):
        base = queue_from_detections([det("a", 0.9)], 0.0).queue
        save_queue(base, tmp_path / "q.json")
        q = load_queue(tmp_path / "q.json", tmp_path / "absent.jsonl")
        assert q.items[0].state == "pending"


class TestExport:
    def make_reviewed(self, tmp_path):
        images = tmp_path / "images"
        for name in ("a", "b"):
            write_png(images / f"{name}.png", 64, 64)
        dets = [
            det("a", 0.9, 0.25, 0.25, 0.2, 0.2),
            det("a", 0.8, 0.75, 0.75, 0.2, 0.2),
            det("b", 0.7, 0.5, 0.5, 0.4, 0.4),
        ]
        queue = queue_from_detections(dets, 0.0, images_root=str(images)).queue
        return queue, images

    def test_two_accepted_boxes_export_two_lines(self, tmp_path):
        queue, _ = self.make_reviewed(tmp_path)
        decide(queue, "item-0000", "accept")
        decide(queue, "item-0001", "accept")
        decide(queue, "item-0002", "reject")
        idx, report = export_accepted(queue, tmp_path / "out")
        assert (tmp_path / "out" / "a.txt").read_text().count("\n") == 2
        assert report.exported_images == 2
        assert report.negative_images == 1

    def test_all_rejected_image_becomes_negative(self, tmp_path):
        queue, _ = self.make_reviewed(tmp_path)
        for item in queue.items:
            decide(queue, item.item_id, "reject")
        idx, _ = export_accepted(queue, tmp_path / "out")
        assert (tmp_path / "out" / "a.txt").read_text() == ""
        assert all(e.label_state == "negative" for e in idx.entries)

    def test_edited_box_exports_exact_coordinates(self, tmp_path):
        queue, _ = self.make_reviewed(tmp_path)
        edited = NormalizedBox(0, 0.3, 0.3, 0.2, 0.2)  # overlaps the proposal
        decide(queue, "item-0000", "edit", edited)
        decide(queue, "item-0001", "reject")
        decide(queue, "item-0002", "reject")
        _, report = export_accepted(queue, tmp_path / "out")
        assert (tmp_path / "out" / "a.txt").read_text() == serialize_label_file([edited])
        assert "item-0000" in report.edit_drift
        assert 0.0 < report.edit_drift["item-0000"] < 1.0

    def test_pending_blocks_export_without_force(self, tmp_path):
        queue, _ = self.make_reviewed(tmp_path)
        decide(queue, "item-0000", "accept")
        with pytest.raises(ReviewError):
            export_accepted(queue, tmp_path / "out")
        _, report = export_accepted(queue, tmp_path / "out", force=True)
        assert report.skipped_pending_items == 2

    def test_no_rejected_box_ever_exported(self, tmp_path, rng):
        queue, _ = self.make_reviewed(tmp_path)
        rejected_boxes = []
        for item in queue.items:
            if rng.random() < 0.5:
                decide(queue, item.item_id, "reject")
                rejected_boxes.append(item.proposed)
            else:
                decide(queue, item.item_id, "accept")
        export_accepted(queue, tmp_path / "out")
        exported = "".join(
            p.read_text() for p in (tmp_path / "out").glob("*.txt")
        )
        for box in rejected_boxes:
            accepted_same = any(
                i.state == "accepted" and i.proposed == box for i in queue.items
            )
            if not accepted_same:
                assert serialize_label_file([box]).strip() not in exported

    def test_decision_order_does_not_change_export(self, tmp_path):
        final = {"item-0000": "accept", "item-0001": "reject", "item-0002": "accept"}

        def run(order, out):
            queue, _ = self.make_reviewed(tmp_path)
            for item_id in order:
                decide(queue, item_id, "reject")  # churn
            for item_id in order:
                decide(queue, item_id, final[item_id])
            export_accepted(queue, tmp_path / out)
            return {
                p.name: p.read_text() for p in sorted((tmp_path / out).glob("*.txt"))
            }

        a = run(["item-0000", "item-0001", "item-0002"], "out1")
        b = run(["item-0002", "item-0000", "item-0001"], "out2")
        assert a == b

    def test_export_requires_images_root(self, tmp_path):
        queue = queue_from_detections([det("a", 0.9)], 0.0).queue
        decide(queue, "item-0000", "accept")
        with pytest.raises(ReviewError):
            export_accepted(queue, tmp_path / "out")

    def test_export_output_reindexes_cleanly(self, tmp_path):
        queue, _ = self.make_reviewed(tmp_path)
        for item in queue.items:
            decide(queue, item.item_id, "accept")
        idx, _ = export_accepted(queue, tmp_path / "out")
        assert idx.counts()["labeled"] == 2


def test_import_from_file_round_trip(tmp_path):
    dets = [det("a", 0.9), det("b", 0.3)]
    p = tmp_path / "dets.jsonl"
    write_detections_jsonl(dets, p)
    result = import_detections(p, 0.25)
    assert len(result.queue) == 2
