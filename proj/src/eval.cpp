#include "relgen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "io_util.hpp"
#include "relgen/error.hpp"

namespace relgen {

using nlohmann::json;

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "max") return Aggregation::max;
    if (s == "sum") return Aggregation::sum;
    throw_invalid("unknown aggregation \"" + s + "\"");
}

const char* to_string(Aggregation agg) { return agg == Aggregation::max ? "max" : "sum"; }

PredictionRecord aggregate_relations(const std::string& image_id,
                                     const std::vector<ScoredSequence>& sequences,
                                     const PrefixTrie& trie, const Corpus& corpus, int k,
                                     Aggregation agg) {
    if (k < 1) throw_invalid("top-k must be >= 1");
    PredictionRecord record;
    record.image_id = image_id;

    std::map<ClassId, double> by_relation;
    for (const ScoredSequence& seq : sequences) {
        TripleId triple_id;
        if (seq.triple_id) {
            triple_id = *seq.triple_id;
        } else if (trie.is_terminal_path(seq.tokens)) {
            triple_id = trie.resolve(seq.tokens);
        } else {
            throw_invalid("image " + image_id + ": sequence does not resolve to a triple");
        }
        ClassId relation = corpus.triples[static_cast<size_t>(triple_id)].relation;
        double prob = std::exp(seq.logprob);
        auto [it, inserted] = by_relation.emplace(relation, prob);
        if (!inserted) {
            if (agg == Aggregation::max)
                it->second = std::max(it->second, prob);
            else
                it->second = std::min(1.0, it->second + prob);
        }
    }

    std::vector<RelationScore> ranked;
    ranked.reserve(by_relation.size());
    for (const auto& [relation, prob] : by_relation) ranked.push_back({relation, prob});
    std::sort(ranked.begin(), ranked.end(), [](const RelationScore& a, const RelationScore& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        return a.relation < b.relation;
    });
    if (static_cast<int>(ranked.size()) > k) ranked.resize(static_cast<size_t>(k));

    record.relations = std::move(ranked);
    record.shortfall = static_cast<int>(record.relations.size()) < k;
    return record;
}

EvalReport mean_recall(const std::vector<PredictionRecord>& predictions,
                       const std::vector<ImageRecord>& records) {
    std::map<std::string, std::set<ClassId>> predicted;
    std::set<std::string> known_images;
    for (const ImageRecord& rec : records) known_images.insert(rec.image_id);
    for (const PredictionRecord& pred : predictions) {
        if (!known_images.count(pred.image_id))
            throw_invalid("prediction for unknown image " + pred.image_id);
        auto [it, inserted] = predicted.try_emplace(pred.image_id);
        if (!inserted) throw_invalid("duplicate prediction for image " + pred.image_id);
        for (const RelationScore& rs : pred.relations) it->second.insert(rs.relation);
    }

    std::map<ClassId, int> gt_count;
    std::map<ClassId, int> hit_count;
    for (const ImageRecord& rec : records) {
        auto it = predicted.find(rec.image_id);
        const std::set<ClassId>* hits = it == predicted.end() ? nullptr : &it->second;
        for (ClassId relation : rec.annotation.gt_relations) {
            ++gt_count[relation];
            if (hits && hits->count(relation)) ++hit_count[relation];
        }
    }

    EvalReport report;
    report.images = static_cast<int>(records.size());
    double sum = 0.0;
    for (const auto& [relation, count] : gt_count) {
        double recall = static_cast<double>(hit_count[relation]) / static_cast<double>(count);
        report.per_class_recall.emplace(relation, recall);
        sum += recall;
    }
    report.classes_evaluated = static_cast<int>(gt_count.size());
    report.mean_recall = gt_count.empty() ? 0.0 : sum / static_cast<double>(gt_count.size());
    return report;
}

void save_predictions(const std::vector<PredictionRecord>& predictions,
                      const std::filesystem::path& path) {
    std::string out;
    for (const PredictionRecord& pred : predictions) {
        json relations = json::array();
        for (const RelationScore& rs : pred.relations)
            relations.push_back({rs.relation, rs.probability});
        json line{{"image_id", pred.image_id},
                  {"relations", relations},
                  {"shortfall", pred.shortfall}};
        out += line.dump();
        out += '\n';
    }
    write_file(path, out);
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
    std::vector<PredictionRecord> predictions;
    for_each_line(path, [&](int line_no, const std::string& line) {
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw_parse(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        PredictionRecord pred;
        pred.image_id = j.at("image_id").get<std::string>();
        pred.shortfall = j.value("shortfall", false);
        for (const auto& rs : j.at("relations")) {
            if (!rs.is_array() || rs.size() != 2)
                throw_parse(path.string() + ":" + std::to_string(line_no) +
                            ": relations entries must be [id, prob]");
            pred.relations.push_back({rs[0].get<ClassId>(), rs[1].get<double>()});
        }
        predictions.push_back(std::move(pred));
    });
    return predictions;
}

std::string report_to_json(const EvalReport& report, const Corpus& corpus) {
    json per_class = json::object();
    for (const auto& [relation, recall] : report.per_class_recall)
        per_class[corpus.relations.name(relation)] = 100.0 * recall;
    json j{{"images", report.images},
           {"classes_evaluated", report.classes_evaluated},
           {"mean_recall_percent", 100.0 * report.mean_recall},
           {"per_class_recall_percent", per_class}};
    return j.dump(2) + "\n";
}

}  // namespace relgen
