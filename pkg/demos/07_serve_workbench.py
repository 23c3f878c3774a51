"""Start the workbench HTTP service with both demo models loaded, ready
for the browser UI (see frontend/) or raw JSON calls:

    curl -s localhost:8970/models/topic/classify \
         -d '{"text": "the referee kept the trophy"}'

Interactive crafting happens through sessions:

    POST /sessions {"model": "topic", "text": ..., "target": "Kitchen"}
    POST /sessions/{id}/suggest {"strategies": ["insert", "modify"]}
    POST /sessions/{id}/apply {"candidate_id": ...}
    POST /sessions/{id}/undo
"""

from advtext import saliency, service, store

import advtext as at
import _common

char = _common.topic_model()
word = _common.sentiment_model()
htps = {"topic": _common.topic_htps(char)}

senti_path = _common.OUT / "sentiment_htps.json"
if senti_path.exists():
    htps["sentiment"] = store.load_htps(senti_path)
else:
    print("mining sentiment hot phrases (first run only) ...")
    train, _ = at.make_sentiment_corpus()
    htps["sentiment"] = saliency.mine_htps(word, train)
    store.save_htps(htps["sentiment"], senti_path)

api = service.WorkbenchApi({"topic": char, "sentiment": word}, htps,
                           store.load_lexicons())
service.serve_forever(api, host="127.0.0.1", port=8970)
