"""
masked-regression CLI - 日本語メッセージカタログ

プレースホルダ ({path}, {cmd} など) は str.format() で置換されます。
"""

MESSAGES = {

    # =========================================================================
    # 共通
    # =========================================================================

    "pass_word": "合格",
    "fail_word": "不合格",
    "verdict_pass": "すべてのチェックに合格しました。",
    "verdict_fail": "不合格のチェックがあります (レポートを参照)。",
    "report_written": "レポートを {path} に書き込みました",
    "error_prefix": "エラー: {error}",
    "error_regime_required": "--regime が必要です (small-beta, big-eta, interm-eta, small-eta)",
    "error_data_required": "--data が必要です",
    "error_file_not_found": "ファイルが見つかりません: {path}",

    # =========================================================================
    # 警告 (stderr)
    # =========================================================================

    "warn_runs_read_failed": "警告: 実行ログを読み込めませんでした: {error}",
    "warn_runs_corrupt_line": "警告: 実行ログの {line_num} 行目が壊れているためスキップします",
    "warn_bad_threads": "警告: MREG_THREADS={value} は整数ではありません。1 スレッドで実行します",

    # =========================================================================
    # mreg generate / corrupt / estimate
    # =========================================================================

    "generate_desc": "クリーンなデータセット (x ~ N(0, I), y = beta^T x + ノイズ) を JSON lines で生成します。",
    "generate_error_no_beta": "--beta-norm か --beta のどちらかを指定してください",
    "generate_done": "次元 {d} のサンプル {n} 件を {path} に書き込みました",
    "corrupt_desc": "データセットに敵対者を適用するか、構成に対してカップリング敵対者を実行します。",
    "corrupt_error_n_required": "--adversary coupling には --n が必要です",
    "corrupt_done": "{adversary} を適用し {path} に書き込みました",
    "corrupt_paired_done": "ペアのデータセットを {path} に書き込みました (success={success}, 列ごとの最大編集数={max_edits})",
    "estimate_desc": "JSON lines データセットに推定器 (a1, a2, a3, unified, ols) を適用します。",

    # =========================================================================
    # mreg couple-verify / forced-error
    # =========================================================================

    "couple_verify_desc": "カップリングのモンテカルロ検証: 周辺分布、不一致の予算、ラベルの共有。",
    "couple_verify_error_no_specs": "設定ファイルに spec がありません",
    "couple_verify_line": "  {regime:<11} 平均不一致数 {mean:.4g}  上界 {bound:.4g}  {result}",
    "forced_error_desc": "カップリング敵対者を実行し、全推定器の誤差が分離幅の半分以上になることを確認します。",
    "forced_error_summary": "敵対者の成功 {successes}/{runs}、強制誤差 >= {half:.4g} (予測オーダー {predicted:.4g})",

    # =========================================================================
    # mreg regime-table / calibrate
    # =========================================================================

    "regime_table_desc": "レジーム格子上で A1/A2/A3/unified を両方のストレス敵対者に対して実行します。",
    "regime_table_line": "  d={d} eta={eta:g} |beta|={beta_norm:g}: 予測 {predicted}, 最良 {best}, 内部={interior}  {result}",
    "calibrate_desc": "不一致数と誤差の上界に現れる定数を測定します。",
    "calibrate_line": "  {key:<22} {value:.4g}",
    "calibrate_constants_written": "提案された定数を {path} に書き込みました",

    # =========================================================================
    # mreg history
    # =========================================================================

    "history_desc": "実行ログの最近の実行を表示します。",
    "history_empty": "まだ実行記録がありません。",
    "history_line": "{timestamp}  {command:<14} seed={seed}  {result}  {output}",

    # =========================================================================
    # メイン
    # =========================================================================

    "main_error_unknown_command": "エラー: 不明なコマンド '{cmd}'。",
    "main_error_available_commands": "  利用可能なコマンド: generate, corrupt, estimate, couple-verify, forced-error, regime-table, calibrate, history, version, help",
    "main_error_help_hint": "  使い方は 'mreg help' を実行してください。",

    "help_text": """masked-regression - 座標ごとの消去下での線形回帰

使い方:
  mreg generate --d D --n N (--beta-norm X | --beta b1,b2,...) [--sigma S]
  mreg corrupt --adversary oblivious|sign-flip --eta ETA --data FILE
  mreg corrupt --adversary coupling --eta ETA --n N --regime R [spec フラグ] [--mode erase|replace]
  mreg estimate --alg a1|a2|a3|unified|ols --data FILE [--eta ETA]
  mreg couple-verify [--regime R spec フラグ | --config FILE] [--marginal-n N] [--eta ETA]
  mreg forced-error --regime R [spec フラグ] --eta ETA --n N [--runs K] [--alg NAME ...]
  mreg regime-table [--config FILE] [--n N]
  mreg calibrate [--write-constants FILE]
  mreg history [--last N]
  mreg version

spec フラグ: --d, --b, --s, --eps, --B, --E, --sigma, --r
共通フラグ: --seed, --out, --trials, --threads

終了コード: 0 合格, 1 チェック失敗, 2 使い方または入力のエラー

環境変数:
  MREG_HOME     実行ログと既定の出力ディレクトリ (既定: ~/.mreg)
  MREG_THREADS  既定のワーカースレッド数 (結果には影響しません)
  MREG_LANG     表示言語 (en, ja)
""",
}
