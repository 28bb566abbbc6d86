"""One annotation round over HTTP, scripted end to end.

Starts the task service on an ephemeral port, plays four annotators
against it with plain HTTP requests, and shows how majority resolution
and the conflict rules behave. This is the same wire protocol the
browser UI speaks.

    python3 demos/annotation_round.py
"""

import json
import threading
import urllib.error
import urllib.request

from newslens.annotation import AnnotationTask
from newslens.annotation_service import AnnotationService, make_server

tasks = [
    AnnotationTask("task-01", "seg-01", "FNC", "rates held steady again",
                   ("economy", "healthcare", "taxes")),
    AnnotationTask("task-02", "seg-02", "CNN", "premiums rise next year",
                   ("healthcare", "economy", "immigration")),
    AnnotationTask("task-03", "seg-03", "NBC", "storm closes schools",
                   ("disasters", "education", "crime")),
]
service = AnnotationService(tasks)
server = make_server(service, port=0)
threading.Thread(target=server.serve_forever, daemon=True).start()
base = "http://127.0.0.1:%d" % server.server_address[1]
print(f"service on {base}\n")


def get(path):
    with urllib.request.urlopen(base + path) as r:
        return json.loads(r.read())


def post(payload):
    req = urllib.request.Request(
        base + "/records",
        data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"},
    )
    try:
        with urllib.request.urlopen(req) as r:
            return r.status, json.loads(r.read())
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read())


# each annotator pulls their next open task until none are left
votes = {
    "alice": {"task-01": "economy", "task-02": "healthcare", "task-03": "disasters"},
    "bob": {"task-01": "economy", "task-02": "healthcare", "task-03": "disasters"},
    "carol": {"task-01": "economy", "task-02": "economy", "task-03": "disasters"},
    "dave": {"task-01": "economy", "task-02": "immigration", "task-03": "none"},
}
for name, script in votes.items():
    while True:
        task = get(f"/tasks/next?annotator={name}")["task"]
        if task is None:
            break
        choice = script[task["task_id"]]
        status, body = post({"task_id": task["task_id"], "annotator": name,
                             "choice": choice, "token": f"{name}-{task['task_id']}"})
        print(f"{name:6} {task['task_id']} -> {choice:12} ({status})")
    print()

print("resolutions after four annotators:")
for tid, res in sorted(service.resolutions().items()):
    print(f"  {tid}: {res.status:10} choice={res.choice}  records={res.n_records}")

# task-02 split 2-2, so it stays open; a fifth opinion settles it
status, body = post({"task_id": "task-02", "annotator": "erin",
                     "choice": "healthcare", "token": "erin-1"})
res = service.resolutions()["task-02"]
print(f"\nfifth vote on task-02 ({status}): {res.status}, choice={res.choice}")

# the service is idempotent on exact repeats and refuses changed answers
status, body = post({"task_id": "task-01", "annotator": "alice",
                     "choice": "economy", "token": "alice-task-01"})
print(f"\nalice repeats her vote:    {status} created={body['created']}")
status, body = post({"task_id": "task-01", "annotator": "alice",
                     "choice": "taxes", "token": "alice-retry-2"})
print(f"alice changes her answer:  {status} {body['error']}")

print("\nprogress:", json.dumps(get("/progress")))
server.shutdown()
