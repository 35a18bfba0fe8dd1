"""
Configurações gerais do toolkit de composição de ataques.

Centraliza todas as constantes: hiperparâmetros padrão de treino, parâmetros
dos ataques, presets de privacidade diferencial, caminhos de saída e versão
do schema dos manifestos.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Carrega variáveis de ambiente do arquivo .env
load_dotenv()

# --- Saída / Artefatos ---
# Diretório raiz onde cada experimento grava seus artefatos
OUTPUT_ROOT = Path(os.getenv("OUTPUT_ROOT", Path(__file__).parent / "runs"))

# Nome do índice SQLite dentro do diretório de um experimento
ARTIFACT_INDEX_NAME = "artifact_index.sqlite"

# Nome da tabela de artefatos no índice
ARTIFACT_TABLE_NAME = "artifacts"

# Chave primária composta da tabela de artefatos
PRIMARY_KEY_COLUMNS = [
    'stage',
    'artifact_key',
]

# Versão do schema dos manifestos (comparison_table exige igualdade)
SCHEMA_VERSION = "1"

# --- Paralelismo ---
DEFAULT_WORKERS = int(os.getenv("DEFAULT_WORKERS", "1"))

# --- Dataset sintético (escala de bancada) ---
SYNTHETIC_DEFAULTS = {
    "n_samples": 4000,
    "image_size": 12,
    "num_classes": 4,
    "num_attributes": 2,
    "num_properties": 2,
    "noise": 0.25,
    "attribute_property_coupling": 0.0,
}

# --- Treino dos modelos alvo/sombra ---
DEFAULT_MAX_EPOCHS = 100
DEFAULT_BATCH_SIZE = 256
DEFAULT_LEARNING_RATE = 1e-2
# Treino para quando train_acc - test_acc passa deste valor
DEFAULT_OVERFIT_THRESHOLD = 0.250
ARCHITECTURES = ("small_cnn", "mlp", "resnet_small")

# --- Privacidade diferencial ---
DP_EPSILON_PRESETS = (10.0, 20.0, 50.0)
DP_DEFAULT_DELTA = 1e-5
DP_DEFAULT_CLIP_NORM = 1.0

# --- Ataques adversariais ---
PGD_DEFAULTS = {
    "epsilon": 8 / 255,
    "step": 2 / 255,
    "max_iters": 50,
}
SQUARE_DEFAULTS = {
    "epsilon": 8 / 255,
    "max_queries": 1000,
    "p_init": 0.3,
}

# --- Modelos de ataque ---
MEMINF_ATTACK_EPOCHS = 50
MEMINF_ATTACK_LR = 1e-5
MEMINF_ATTACK_BATCH_SIZE = 64
ATTRINF_EPOCHS = 100
ATTRINF_LR = 1e-2
ATTRINF_HIDDEN = 64
ATTRINF_BATCH_SIZE = 128

# --- LiRA ---
LIRA_LOGIT_CLAMP = 20.0
LIRA_COV_REGULARIZATION = 1e-6
LIRA_MIN_MODELS_PER_SIDE = 2
# Tamanho padrão da frota online (par; cada amostra fica "in" em metade)
LIRA_DEFAULT_FLEET_SIZE = 8

# --- Composições ---
CALIBRATION_HIDDEN = 32
# Limite do score calibrado dentro da BCE do treino conjunto
CALIBRATION_SCORE_CLAMP = 1e-6

# --- Métricas ---
DEFAULT_FPR_TARGETS = (0.001,)
KS_ALPHA = 0.05

# --- Configurações de Log ---
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
