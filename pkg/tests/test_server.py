import pytest
from fastapi.testclient import TestClient

from boxforge.evaluation import Detection, write_detections_jsonl
from boxforge.labels import NormalizedBox, serialize_label_file
from boxforge.review import import_detections, save_queue
from boxforge.server import ReviewService, create_app

from .conftest import write_png


@pytest.fixture
def workspace(tmp_path):
    images = tmp_path / "images"
    for i in range(3):
        write_png(images / f"im{i}.png", 64, 64)
    dets = [
        Detection("im0", NormalizedBox(0, 0.25, 0.25, 0.2, 0.2), 0.9),
        Detection("im0", NormalizedBox(0, 0.75, 0.75, 0.2, 0.2), 0.8),
        Detection("im1", NormalizedBox(0, 0.5, 0.5, 0.4, 0.4), 0.7),
        Detection("im2", NormalizedBox(0, 0.5, 0.5, 0.3, 0.3), 0.6),
    ]
    dets_path = tmp_path / "dets.jsonl"
    write_detections_jsonl(dets, dets_path)
    queue = import_detections(dets_path, 0.25, images_root=str(images)).queue
    queue_path = tmp_path / "queue.json"
    save_queue(queue, queue_path)
    return {
        "tmp": tmp_path,
        "queue_path": queue_path,
        "journal_path": tmp_path / "journal.jsonl",
        "images": images,
        "export_root": tmp_path / "export",
    }


def make_client(ws) -> TestClient:
    service = ReviewService.from_files(
        ws["queue_path"], ws["journal_path"], ws["images"], ws["export_root"]
    )
    return TestClient(create_app(service))


class TestQueueEndpoints:
    def test_queue_summary(self, workspace):
        client = make_client(workspace)
        body = client.get("/api/queue").json()
        assert body["total"] == 4
        assert body["pending"] == 4
        assert body["accepted"] == 0

    def test_items_filter_by_state(self, workspace):
        client = make_client(workspace)
        client.post("/api/items/item-0000/decision", json={"action": "accept"})
        pending = client.get("/api/items", params={"state": "pending"}).json()
        assert pending["total"] == 3
        accepted = client.get("/api/items", params={"state": "accepted"}).json()
        assert [i["item_id"] for i in accepted["items"]] == ["item-0000"]

    def test_items_bad_state_rejected(self, workspace):
        client = make_client(workspace)
        assert client.get("/api/items", params={"state": "bogus"}).status_code == 422

    def test_image_bytes_and_content_type(self, workspace):
        client = make_client(workspace)
        resp = client.get("/api/images/im0")
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        assert resp.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_missing_image_404(self, workspace):
        client = make_client(workspace)
        assert client.get("/api/images/ghost").status_code == 404


class TestDecisions:
    def test_accept(self, workspace):
        client = make_client(workspace)
        body = client.post("/api/items/item-0000/decision", json={"action": "accept"}).json()
        assert body["state"] == "accepted"
        assert body["final_box"] == body["proposed"]

    def test_edit(self, workspace):
        client = make_client(workspace)
        box = {"class_id": 0, "cx": 0.4, "cy": 0.4, "w": 0.25, "h": 0.25}
        body = client.post(
            "/api/items/item-0000/decision", json={"action": "edit", "box": box}
        ).json()
        assert body["state"] == "edited"
        assert body["final_box"]["cx"] == 0.4

    def test_edit_without_box_rejected(self, workspace):
        client = make_client(workspace)
        resp = client.post("/api/items/item-0000/decision", json={"action": "edit"})
        assert resp.status_code == 422

    def test_invalid_box_rejected(self, workspace):
        client = make_client(workspace)
        box = {"class_id": 0, "cx": 1.4, "cy": 0.4, "w": 0.25, "h": 0.25}
        resp = client.post(
            "/api/items/item-0000/decision", json={"action": "edit", "box": box}
        )
        assert resp.status_code == 422

    def test_unknown_item_404(self, workspace):
        client = make_client(workspace)
        resp = client.post("/api/items/nope/decision", json={"action": "accept"})
        assert resp.status_code == 404

    def test_unknown_action_rejected(self, workspace):
        client = make_client(workspace)
        resp = client.post("/api/items/item-0000/decision", json={"action": "promote"})
        assert resp.status_code == 422

    def test_decisions_survive_service_restart(self, workspace):
        client = make_client(workspace)
        client.post("/api/items/item-0000/decision", json={"action": "accept"})
        client.post("/api/items/item-0001/decision", json={"action": "reject"})

        fresh = make_client(workspace)  # reload from queue + journal
        body = fresh.get("/api/queue").json()
        assert body["accepted"] == 1
        assert body["rejected"] == 1
        assert body["pending"] == 2


class TestExportEndpoint:
    def decide_all(self, client):
        for item in client.get("/api/items").json()["items"]:
            client.post(f"/api/items/{item['item_id']}/decision", json={"action": "accept"})

    def test_export_conflicts_while_pending(self, workspace):
        client = make_client(workspace)
        assert client.post("/api/export", json={"force": False}).status_code == 409
        assert client.post("/api/export", json={"force": True}).status_code == 200

    def test_export_writes_labels(self, workspace):
        client = make_client(workspace)
        self.decide_all(client)
        body = client.post("/api/export", json={"force": False}).json()
        assert body["exported_images"] == 3
        label = (workspace["export_root"] / "im1.txt").read_text()
        assert label == serialize_label_file([NormalizedBox(0, 0.5, 0.5, 0.4, 0.4)])
