/* relgen C API: prefix-tree constrained relation generation for scene
 * images. Opaque handles over an immutable workspace (triple corpus,
 * vocabulary, prefix trie, optional dataset and scorer); every call returns
 * a status code and structured results as heap-allocated JSON strings.
 *
 * Thread safety: a workspace is immutable after the load/set calls complete;
 * decode/run/eval/ablate on a fully configured workspace may be called from
 * any thread. The error message buffer is thread-local.
 */
#ifndef RELGEN_H
#define RELGEN_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum relgen_status {
    RELGEN_OK = 0,
    RELGEN_ERR_IO = 1,       /* missing or unreadable file */
    RELGEN_ERR_PARSE = 2,    /* malformed input */
    RELGEN_ERR_INVALID = 3,  /* bad argument or configuration */
    RELGEN_ERR_STATE = 4,    /* valid input that cannot be acted on */
    RELGEN_ERR_INTERNAL = 5
} relgen_status;

const char* relgen_status_name(relgen_status status);

/* Message for the last failing call on this thread; empty string if none. */
const char* relgen_last_error(void);

/* Frees any string returned through a char** out parameter. */
void relgen_string_free(char* s);

typedef struct relgen_workspace relgen_workspace;

/* Loads a JSON-lines triple corpus and builds vocabulary and prefix trie. */
relgen_status relgen_workspace_open(const char* triples_path, relgen_workspace** out);
void relgen_workspace_close(relgen_workspace* ws);

/* Corpus/vocabulary/trie counts as JSON. */
relgen_status relgen_workspace_info(const relgen_workspace* ws, char** json_out);
/* Trie adjacency dump as JSON. */
relgen_status relgen_trie_dump(const relgen_workspace* ws, char** json_out);
/* Ordered token list as JSON (index = id). */
relgen_status relgen_vocab_dump(const relgen_workspace* ws, char** json_out);

relgen_status relgen_workspace_load_dataset(relgen_workspace* ws, const char* dataset_path);

/* scorer_json: {"kind":"weights","path":"weights.json"} |
 *              {"kind":"bigram","alpha":0.1} | {"kind":"uniform"} */
relgen_status relgen_workspace_set_scorer(relgen_workspace* ws, const char* scorer_json);

/* options_json: {"image_id":str,"subject":int,"object":int,
 *   "beam":int?,"mode":"restricted"|"unrestricted"?,"renormalize":bool?,
 *   "sampling":bool?,"seed":int?,"distinct_relations":int?}
 * Result: {"image_id":...,"sequences":[{"tokens":[...],"text":str,
 *   "logprob":num,"prob":num,"triple_id":int?,"valid":bool,"eos":bool}...]} */
relgen_status relgen_decode(const relgen_workspace* ws, const char* options_json,
                            char** json_out);

/* config_json mirrors the run config file keys (oh_mode, os_k, rtg_mode,
 * beam_width, aggregation, renormalize, sampling, seed, jobs, out,
 * pair_within_topk, save_highlights, scorer, alpha, weights). Writes
 * predictions.jsonl and report.json under "out" when set; returns the
 * report JSON. */
relgen_status relgen_run(const relgen_workspace* ws, const char* config_json,
                         char** report_json_out);

/* Evaluates an existing predictions.jsonl against the loaded dataset. */
relgen_status relgen_eval(const relgen_workspace* ws, const char* predictions_path,
                          char** report_json_out);

/* config_json: run config plus {"rows":["rtg:unrestricted","os:1",...]}
 * (empty or missing rows = full 11-row grid). Returns
 * {"rows":[{"axis","name","label","mean_recall_percent"}...],"table":str}. */
relgen_status relgen_ablate(const relgen_workspace* ws, const char* config_json,
                            char** json_out);

/* File-to-file subject/object highlighting; mode is one of
 * none|grey|random|specific. */
relgen_status relgen_highlight_file(const char* image_path, const char* segmap_path,
                                    int32_t subject_instance, int32_t object_instance,
                                    const char* mode, uint64_t seed,
                                    const char* output_path);

/* config_json: {"seed":int,"images":int,"width":int?,"height":int?,
 * "out_dir":str}. Generates the synthetic dataset tree; returns summary
 * JSON. */
relgen_status relgen_synth(const char* config_json, char** json_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* RELGEN_H */
