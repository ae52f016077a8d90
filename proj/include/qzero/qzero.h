#ifndef QZERO_QZERO_H
#define QZERO_QZERO_H

/* C interface to the qzero library.
 *
 * Every function returns a qz_status. On failure, qz_last_error() describes
 * the problem for the calling thread until its next qzero call. Strings
 * returned through char** out-parameters are owned by the caller and must be
 * released with qz_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define QZ_API __declspec(dllexport)
#else
#define QZ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qz_status {
    QZ_OK = 0,
    QZ_ERR_INVALID_ARGUMENT = 1,
    QZ_ERR_ILLEGAL_MOVE = 2,
    QZ_ERR_IO = 3,
    QZ_ERR_CORRUPT = 4,
    QZ_ERR_CONFIG = 5,
    QZ_ERR_NOT_FOUND = 6,
    QZ_ERR_NOT_READY = 7,
    QZ_ERR_NON_FINITE = 8,
    QZ_ERR_INTERNAL = 9
} qz_status;

typedef enum qz_play_mode { QZ_MODE_ARGMAX = 0, QZ_MODE_SAMPLING = 1 } qz_play_mode;

typedef struct qz_game qz_game;
typedef struct qz_net qz_net;
typedef struct qz_service qz_service;

QZ_API const char* qz_version(void);
QZ_API const char* qz_last_error(void);
QZ_API const char* qz_status_name(qz_status status);
QZ_API void qz_string_free(char* s);

/* --- games ------------------------------------------------------------- */

QZ_API qz_status qz_game_new(int size, double komi, qz_game** out);
QZ_API void qz_game_free(qz_game* game);
/* Number of actions, size*size + 1. The last one is pass. */
QZ_API qz_status qz_game_action_count(const qz_game* game, int* out);
QZ_API qz_status qz_game_play(qz_game* game, int action, double* reward, int* done);
QZ_API qz_status qz_game_legal_mask(const qz_game* game, uint8_t* out, size_t len);
QZ_API qz_status qz_game_is_terminal(const qz_game* game, int* out);
/* 1 for Black, 2 for White. */
QZ_API qz_status qz_game_to_move(const qz_game* game, int* out);
/* Tromp-Taylor score from Black's perspective, komi included. */
QZ_API qz_status qz_game_score(const qz_game* game, double* out);
QZ_API qz_status qz_game_dump(const qz_game* game, char** out);

/* --- networks ---------------------------------------------------------- */

/* Accepts a parameter file or a checkpoint directory (its target.bin). */
QZ_API qz_status qz_net_load(const char* path, qz_net** out);
QZ_API void qz_net_free(qz_net* net);
QZ_API qz_status qz_net_board_size(const qz_net* net, int* out);
QZ_API qz_status qz_net_q_values(qz_net* net, const qz_game* game, float* out, size_t len);

/* --- training ---------------------------------------------------------- */

/* Called once per update with the training log line. */
typedef void (*qz_progress_fn)(const char* log_line, void* user);

/* overrides: newline-separated key=value lines, may be NULL.
 * resume_from: checkpoint directory or NULL.
 * summary_json: optional, receives a JSON object describing the run. */
QZ_API qz_status qz_train(const char* config_path, const char* overrides, const char* out_dir, const char* resume_from,
                          qz_progress_fn progress, void* user, char** summary_json);

/* Writes the effective configuration text (defaults, file, overrides). */
QZ_API qz_status qz_config_text(const char* config_path, const char* overrides, char** out);

/* --- evaluation -------------------------------------------------------- */

/* Plays `games` games alternating colours, A Black first. Either player may
 * be "random" for the uniform-random baseline. When record_dir is non-NULL a
 * plain-text record of every game is written there. */
QZ_API qz_status qz_match(const char* player_a, const char* player_b, int games, qz_play_mode mode, double alpha, double komi,
                          uint64_t seed, const char* record_dir, char** result_json);

/* Renders a step,hsg,pool_size log as an SVG chart. */
QZ_API qz_status qz_plot_hsg(const char* hsg_log_path, const char* svg_path, const char* title);

/* Converts a plain-text game record into SGF. */
QZ_API qz_status qz_export_sgf(const char* record_path, char** sgf);

/* Environment steps and network inferences per second. */
QZ_API qz_status qz_bench(int size, int blocks, int filters, int batch, double seconds, char** result_json);

/* --- play service ------------------------------------------------------ */

QZ_API qz_status qz_service_new(const char* checkpoint, double komi, double alpha_display, uint64_t seed, qz_service** out);
QZ_API void qz_service_free(qz_service* service);
QZ_API qz_status qz_service_handle(qz_service* service, const char* method, const char* path, const char* body, int* http_status,
                                   char** content_type, char** response_body);
/* Serves HTTP until the process is interrupted. */
QZ_API qz_status qz_serve(qz_service* service, const char* host, int port, const char* static_dir);

#ifdef __cplusplus
}
#endif

#endif
